// Surgical probe of the refractive-index measurement channel.
//
// Two rendered frames with exactly known camera motion; the filter state is
// set to ground truth except for the refractive index. The update's n
// correction must point toward the true index.

use nalgebra::{DVector, Matrix2, Matrix3, Rotation3, Unit, Vector3};
use refvio_core::camera::{PixelPoint, RefractiveIndex};
use refvio_core::filter::{
    iterated_update, FeatureObservation, FeatureState, FilterCovariance, FilterState, UpdateConfig,
    CORE_DIM, IDX_N,
};
use refvio_core::frontend::{build_pyramid, extract_patch, compute_warp};
use refvio_core::sim::{pool_scene, render_frame, SimConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_hat: f64 = args
        .iter()
        .position(|a| a == "--n-hat")
        .map(|i| args[i + 1].parse().unwrap())
        .unwrap_or(1.36);
    let true_n = 1.33;

    let cfg = SimConfig { image_noise_std: 0.0, ..SimConfig::default() };
    let scene = pool_scene(21);
    let cam = cfg.calibration.camera();

    // Camera looking forward-down from mid-tank, then translated sideways
    // and slightly forward.
    let rot_wc = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
        -Vector3::y(),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::x(),
    ])) * Rotation3::from_axis_angle(&Vector3::x_axis(), -16.0f64.to_radians());
    let pos_a = Vector3::new(5.0, 3.0, 0.8);
    let delta_w = Vector3::new(0.03, 0.05, 0.0); // world motion between frames
    let pos_b = pos_a + delta_w;

    let img_a = render_frame(&scene, &cam, RefractiveIndex(true_n), &rot_wc, &pos_a, &cfg, 0);
    let img_b = render_frame(&scene, &cam, RefractiveIndex(true_n), &rot_wc, &pos_b, &cfg, 0);
    let pyr_a = build_pyramid(&img_a, 2).unwrap();
    let pyr_b = build_pyramid(&img_b, 2).unwrap();

    // Relative camera motion, current(B)-from-previous(A): p_B = R p_A + t.
    let rel_rot = Rotation3::identity();
    let rel_t = -(rot_wc.inverse() * delta_w);

    // State: identity pose proxy (only features and n matter here), belief n_hat.
    let mut state = FilterState::identity_with_n(n_hat);
    let mut tracks = Vec::new();
    let n_belief = RefractiveIndex(n_hat);
    for gy in 0..5 {
        for gx in 0..7 {
            let px = PixelPoint::new(50.0 + 37.0 * gx as f64, 50.0 + 37.0 * gy as f64);
            // True geometry of the pixel in frame A.
            let true_bearing = cam.unproject(RefractiveIndex(true_n), px).unwrap();
            let dir_w = rot_wc * true_bearing.into_inner();
            let Some((depth, _)) = scene.trace(&pos_a, &dir_w) else { continue };
            // Believed bearing under n_hat; believed distance = true depth
            // (depth errors are not under test).
            let bearing = cam.unproject(n_belief, px).unwrap();
            let Ok(patch) = extract_patch(&pyr_a, px, 8, 2) else { continue };
            // Propagate the believed landmark through the TRUE motion.
            let p_new = rel_rot * (bearing.into_inner() * depth) + rel_t;
            state.features.push(FeatureState {
                bearing: Unit::new_normalize(p_new),
                rho: 1.0 / p_new.norm(),
            });
            let warp = compute_warp(&cam, n_belief, &rel_rot, &rel_t, &bearing, 1.0 / depth, px)
                .unwrap_or_else(|_| Matrix2::identity());
            tracks.push((patch, warp));
        }
    }
    let j = state.features.len();
    eprintln!("probe features: {j}");

    let dim = state.dim();
    let mut cov = FilterCovariance::zeros(dim);
    cov.matrix[(IDX_N, IDX_N)] = 0.05 * 0.05;
    for f in 0..j {
        let base = CORE_DIM + 3 * f;
        cov.matrix[(base, base)] = 1e-8;
        cov.matrix[(base + 1, base + 1)] = 1e-8;
        cov.matrix[(base + 2, base + 2)] = 1e-6;
    }

    let observations: Vec<Option<FeatureObservation>> = tracks
        .iter()
        .map(|(patch, warp)| Some(FeatureObservation { patch, warp: *warp, weight: 1.0 }))
        .collect();
    let n_before = state.n;
    let outcome = iterated_update(
        &cam,
        &mut state,
        &mut cov,
        &pyr_b,
        &observations,
        &UpdateConfig { gate: false, ..UpdateConfig::default() },
    );
    eprintln!(
        "applied={} iterations={} n: {:.4} -> {:.4} (true {true_n}), dn = {:+.5}",
        outcome.applied,
        outcome.iterations,
        n_before,
        state.n,
        state.n - n_before
    );
    let _ = DVector::<f64>::zeros(1);
}
