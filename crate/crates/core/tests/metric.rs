use nemfilm_core::metric::{
    boundary_family, geodesic, layer_energy_1d, layer_terms, path_energy, phi, profile_ode, slice_distance, tail_fit,
    Endpoint, GeodesicConfig, LayerConfig, TensorPath,
};
use nemfilm_core::potential::{calibrate, Potential, PotentialParams};
use nemfilm_core::qtensor::{rotate_z, uniaxial_in_plane, QTensor};

fn reduced() -> Potential {
    calibrate(&PotentialParams::reduced(-1.0 / 3.0, -1.0, 1.0, 1.0), 60, 11).unwrap()
}

/// Boundary data `−3β(n⊗n − I/3)` with `β = −0.2` and director angle `t`.
fn g(t: f64) -> QTensor {
    uniaxial_in_plane(0.6, t)
}

#[test]
fn geodesic_to_circle_matches_slice_dijkstra() {
    let pot = reduced();
    let cfg = GeodesicConfig::default();
    let geo = phi(0, &g(0.3), &pot, &cfg).unwrap();
    let dij = slice_distance(&pot, &g(0.3), 0, 400).unwrap();
    println!(
        "phi1 = {} (converged {}, iters {}), dijkstra = {}",
        geo.length, geo.converged, geo.iterations, dij.distance
    );
    assert!(geo.converged);
    assert!((geo.length - dij.distance).abs() < 0.02 * dij.distance);
}

#[test]
fn phi_is_rotation_invariant_and_ordered() {
    let pot = reduced();
    let cfg = GeodesicConfig::default();
    let vals: Vec<f64> = (0..8)
        .map(|k| phi(0, &g(0.785 * k as f64), &pot, &cfg).unwrap().length)
        .collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::MAX, f64::MIN), |a, v| (a.0.min(*v), a.1.max(*v)));
    println!("phi1 spread {lo} .. {hi}");
    assert!((hi - lo) / lo < 0.01);
    let phi2 = phi(1, &g(0.0), &pot, &cfg).unwrap().length;
    println!("phi2 = {phi2}");
    assert!(vals[0] < phi2);
}

#[test]
fn trivial_geodesics() {
    let pot = reduced();
    let cfg = GeodesicConfig::default();
    let q = QTensor([0.1, 0.2, 0.3, -0.1, 0.05]);
    assert_eq!(
        geodesic(&Endpoint::Point(q), &Endpoint::Point(q), &pot, &cfg)
            .unwrap()
            .length,
        0.0
    );
    let a = uniaxial_in_plane(1.0, 0.2);
    let b = uniaxial_in_plane(1.0, 1.1);
    let geo = geodesic(&Endpoint::Point(a), &Endpoint::Point(b), &pot, &cfg).unwrap();
    println!("in-well geodesic {}", geo.length);
    assert!(geo.length < 1e-3);
    assert!(
        phi(0, &pot.wells.components[0].representative, &pot, &cfg)
            .unwrap()
            .length
            < 1e-8
    );
}

#[test]
fn profile_and_layer_energy() {
    let pot = reduced();
    let geo = phi(0, &g(0.0), &pot, &GeodesicConfig::default()).unwrap();
    let b = geo.path.euclidean_length();
    let sol = profile_ode(&geo.path, &pot, 12.0, 4000).unwrap();
    assert!(sol.is_strictly_increasing());
    let (slope, r2) = tail_fit(&sol);
    println!(
        "b = {b}, h_end gap = {}, tail slope {slope} r2 {r2}",
        b - sol.h_values.last().unwrap()
    );
    assert!(r2 > 0.99 && slope < 0.0);
    let terms = layer_terms(&sol, &geo.path, &pot);
    let worst = terms
        .gradient
        .iter()
        .zip(&terms.potential)
        .filter(|(_, w)| **w > 1e-12)
        .map(|(g, w)| ((g - w) / w).abs())
        .fold(0.0, f64::max);
    println!("equipartition worst relative {worst}");
    let cfg = LayerConfig {
        s_max: 12.0,
        steps: 4000,
        kappa: 1.0 / 0.75,
    };
    for eps in [0.05, 0.025, 0.0125] {
        let e = layer_energy_1d(&geo.path, &pot, eps, &cfg).unwrap();
        println!("eps {eps}: layer {e}, 2 length {}", 2.0 * geo.length);
    }
    let fam = boundary_family(&geo.path, 0.7, 16);
    assert!((fam.layer_length(&pot) - path_energy(&geo.path, &pot)).abs() < 1e-8);
    assert!(fam.path.start().distance(&rotate_z(&g(0.0), 0.7)) < 1e-15);
    let _ = TensorPath::straight(g(0.0), g(1.0), 4);
}
