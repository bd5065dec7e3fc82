//! Frame-by-frame estimator: tracker bookkeeping, filter orchestration and
//! the dataset run driver.

use crate::camera::{PixelPoint, RefractiveCamera, RefractiveIndex};
use crate::filter::{
    iterated_update, propagate, FeatureObservation, FeatureState,
    FilterCovariance, FilterState, FeatureUpdateStatus, ImuMeasurement, NoiseConfig, UpdateConfig,
    CORE_DIM, IDX_BF, IDX_BW, IDX_N, IDX_Q, IDX_V,
};
use crate::frontend::{
    build_pyramid, compute_warp, detect_features, extract_patch, prealign, DetectParams,
    ImagePyramid, MultiLevelPatch,
};
use crate::image::GrayImage;
use crate::io::{Dataset, IoError, StateRecord};
use crate::sensitivity::{essential_matrix, heuristic_weight, HeuristicParams, RelativeMotion};
use nalgebra::{Matrix2, Unit, UnitQuaternion, Vector3};

/// Full run configuration; serialized next to the outputs for provenance.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub initial_n: f64,
    pub initial_n_std: f64,
    /// Refractive-index random-walk density, 1/sqrt(s).
    pub mn_density: f64,
    pub sigma_intensity: f64,
    pub heuristic: HeuristicParams,
    /// Test hook: force the sensitivity weight to zero for every landmark,
    /// decoupling the refractive index from all updates.
    pub force_zero_sensitivity: bool,
    /// Pin the refractive index at its initial value (no variance, no walk).
    pub fix_n: bool,
    pub patch_size: usize,
    pub pyramid_levels: usize,
    pub max_features: usize,
    pub iekf_iterations: usize,
    pub iekf_step_tol: f64,
    /// Inverse-distance prior for new landmarks (1/m) and its deviation.
    pub rho_prior: f64,
    pub sigma_rho: f64,
    /// Bearing standard deviation of a fresh detection, pixels.
    pub sigma_bearing_px: f64,
    /// Hygiene assertions (covariance symmetry/PSD, unit norms) each step.
    pub paranoid: bool,
    /// Reserved for stochastic components; echoed into outputs.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial_n: 1.33,
            initial_n_std: 0.1,
            mn_density: 1e-4,
            sigma_intensity: 2.0,
            heuristic: HeuristicParams::default(),
            force_zero_sensitivity: false,
            fix_n: false,
            patch_size: 8,
            pyramid_levels: 2,
            max_features: 20,
            iekf_iterations: 5,
            iekf_step_tol: 1e-4,
            rho_prior: 1.0 / 1.5,
            sigma_rho: 1.0,
            sigma_bearing_px: 1.5,
            paranoid: false,
            seed: 0,
        }
    }
}

/// Seconds of accelerometer data averaged for the gravity alignment.
const INIT_WINDOW: f64 = 0.5;
/// Quality decay and prune thresholds of the track scoreboard.
const QUALITY_DECAY: f64 = 0.8;
const QUALITY_PRUNE: f64 = 0.25;
const QUALITY_MIN_AGE: u32 = 8;
/// Frobenius distance from identity beyond which a patch is re-extracted.
const WARP_RESET: f64 = 0.35;
/// Frames after which a landmark stops carrying the refractive-index
/// Jacobian. A fresh landmark's bearing prior is correlated with n through
/// its initialization, which makes the flow-mismatch attribution to n
/// well-posed; once repeated measurements have re-fit the bearing, the
/// landmark can only resist n changes, not inform them.
const N_COUPLING_WINDOW: u32 = 30;
/// Base landmark lifetime in frames. Landmarks are retired and re-detected
/// so a steady share of the population sits inside the coupling window;
/// the stagger term spreads retirements across frames.
const TRACK_LIFETIME: u32 = 40;
const TRACK_LIFETIME_STAGGER: u32 = 2;

/// Appearance bookkeeping of one landmark, parallel to the filter's feature
/// states.
struct Track {
    patch: MultiLevelPatch,
    warp: Matrix2<f64>,
    last_pixel: PixelPoint,
    prev_bearing: Unit<Vector3<f64>>,
    prev_rho: f64,
    quality: f64,
    age: u32,
    /// Monotone creation counter; staggers the retirement schedule.
    id: u64,
    /// Pre-alignment succeeded on the current frame with plausible
    /// illumination; gates participation in the filter update.
    aligned: bool,
}

enum Phase {
    Initializing { t_first: Option<f64>, accel: Vec<Vector3<f64>>, gyro: Vec<Vector3<f64>> },
    Running,
}

pub struct Estimator {
    cam: RefractiveCamera,
    noise: NoiseConfig,
    cfg: RunConfig,
    update_cfg: UpdateConfig,
    detect: DetectParams,
    pub state: FilterState,
    pub cov: FilterCovariance,
    tracks: Vec<Track>,
    motion_since_frame: RelativeMotion,
    last_imu_t: f64,
    phase: Phase,
    image_center: PixelPoint,
    half_diagonal: f64,
    extrinsics_c: Vector3<f64>,
    extrinsics_z: UnitQuaternion<f64>,
    next_track_id: u64,
}

impl Estimator {
    pub fn new(
        cam: RefractiveCamera,
        extrinsics_c: Vector3<f64>,
        extrinsics_z: UnitQuaternion<f64>,
        image_size: (usize, usize),
        mut noise: NoiseConfig,
        cfg: RunConfig,
    ) -> Self {
        noise.mn_density = if cfg.fix_n { 0.0 } else { cfg.mn_density };
        noise.sigma_intensity = cfg.sigma_intensity;
        let update_cfg = UpdateConfig {
            max_iterations: cfg.iekf_iterations,
            step_tol: cfg.iekf_step_tol,
            sigma_intensity: cfg.sigma_intensity,
            ..UpdateConfig::default()
        };
        let detect = DetectParams {
            max_features: cfg.max_features,
            margin: 8 * (1 << cfg.pyramid_levels) / 2 + 6,
            ..DetectParams::default()
        };
        let (w, h) = image_size;
        let image_center = PixelPoint::new(w as f64 / 2.0, h as f64 / 2.0);
        let half_diagonal = 0.5 * ((w * w + h * h) as f64).sqrt();
        let state = FilterState::identity_with_n(cfg.initial_n);
        let cov = FilterCovariance::zeros(CORE_DIM);
        Self {
            cam,
            noise,
            cfg,
            update_cfg,
            detect,
            state,
            cov,
            tracks: Vec::new(),
            motion_since_frame: RelativeMotion::identity(),
            last_imu_t: 0.0,
            phase: Phase::Initializing { t_first: None, accel: Vec::new(), gyro: Vec::new() },
            image_center,
            half_diagonal,
            extrinsics_c,
            extrinsics_z,
            next_track_id: 0,
        }
    }

    pub fn is_initialized(&self) -> bool {
        matches!(self.phase, Phase::Running)
    }

    /// Feed one IMU sample (timestamps strictly increasing).
    pub fn process_imu(&mut self, imu: &ImuMeasurement) {
        match &mut self.phase {
            Phase::Initializing { t_first, accel, gyro } => {
                let t0 = *t_first.get_or_insert(imu.t);
                accel.push(imu.specific_force);
                gyro.push(imu.angular_rate);
                if imu.t - t0 >= INIT_WINDOW {
                    let mean_f: Vector3<f64> =
                        accel.iter().sum::<Vector3<f64>>() / accel.len() as f64;
                    self.initialize(mean_f, imu.t);
                }
            }
            Phase::Running => {
                let dt = imu.t - self.last_imu_t;
                if dt <= 0.0 {
                    return;
                }
                let step = propagate(&mut self.state, &mut self.cov, imu, dt, &self.noise);
                self.motion_since_frame = step.compose_after(&self.motion_since_frame);
                self.last_imu_t = imu.t;
                if self.cfg.paranoid {
                    self.hygiene_check("propagate");
                }
            }
        }
    }

    /// Gravity-aligned attitude from the averaged specific force; the world
    /// origin and yaw are pinned at the initialization pose.
    fn initialize(&mut self, mean_specific_force: Vector3<f64>, t: f64) {
        let up_body = Unit::new_normalize(mean_specific_force);
        let q0 = UnitQuaternion::rotation_between(&up_body, &Vector3::z_axis())
            .unwrap_or_else(UnitQuaternion::identity);
        let mut state = FilterState::identity_with_n(self.cfg.initial_n);
        state.q = q0;
        state.c = self.extrinsics_c;
        state.z = self.extrinsics_z;
        let mut cov = FilterCovariance::zeros(CORE_DIM);
        // Position and yaw define the gauge and stay pinned; roll/pitch carry
        // the gravity-alignment uncertainty.
        let sigma_rp = 0.03f64;
        let up = q0.inverse() * Vector3::z(); // world z in body coordinates
        let att_block = sigma_rp * sigma_rp
            * (nalgebra::Matrix3::identity() - up * up.transpose());
        let pin_biases = std::env::var_os("REFVIO_PIN_BIASES").is_some(); // debug aid
        for i in 0..3 {
            for j in 0..3 {
                cov.matrix[(IDX_Q + i, IDX_Q + j)] = att_block[(i, j)];
            }
            cov.matrix[(IDX_V + i, IDX_V + i)] = 0.05 * 0.05;
            cov.matrix[(IDX_BF + i, IDX_BF + i)] = if pin_biases { 0.0 } else { 0.1 * 0.1 };
            cov.matrix[(IDX_BW + i, IDX_BW + i)] = if pin_biases { 0.0 } else { 0.01 * 0.01 };
        }
        cov.matrix[(IDX_N, IDX_N)] = if self.cfg.fix_n {
            0.0
        } else {
            self.cfg.initial_n_std * self.cfg.initial_n_std
        };
        self.state = state;
        self.cov = cov;
        self.last_imu_t = t;
        self.phase = Phase::Running;
    }

    fn hygiene_check(&self, stage: &str) {
        let asym = self.cov.asymmetry();
        assert!(asym < 1e-9, "{stage}: covariance asymmetry {asym}");
        let min_eig = self.cov.min_eigenvalue();
        assert!(min_eig > -1e-9, "{stage}: covariance not PSD ({min_eig})");
        let defect = self.state.max_norm_defect();
        assert!(defect < 1e-9, "{stage}: unit-norm defect {defect}");
    }

    fn n_index(&self) -> RefractiveIndex {
        RefractiveIndex::new(self.state.n.max(1.0))
    }

    /// Process one camera frame; `None` while the filter is initializing.
    pub fn process_frame(&mut self, t_ns: i64, image: &GrayImage) -> Option<StateRecord> {
        if !self.is_initialized() {
            return None;
        }
        let pyr = build_pyramid(image, self.cfg.pyramid_levels).expect("frame too small");
        let frame_motion = self.motion_since_frame;
        self.motion_since_frame = RelativeMotion::identity();

        self.track_features(&pyr, &frame_motion);
        let weights = self.sensitivity_weights(&frame_motion);
        if std::env::var_os("REFVIO_WEIGHT_TRACE").is_some() {
            let ws: Vec<f64> = weights.iter().flatten().copied().collect();
            let mean = ws.iter().sum::<f64>() / ws.len().max(1) as f64;
            let max = ws.iter().cloned().fold(0.0f64, f64::max);
            eprintln!(
                "  weights: mean={mean:.4} max={max:.4} |t|={:.4} rot={:.5}",
                frame_motion.translation.norm(),
                frame_motion.rotation_angle()
            );
        }
        if std::env::var_os("REFVIO_TRACK_TRACE").is_some() {
            let n = self.n_index();
            for (j, track) in self.tracks.iter().enumerate().take(3) {
                let pred = self
                    .cam
                    .project(n, &self.state.features[j].bearing.into_inner())
                    .map(|p| (p.u, p.v))
                    .unwrap_or((f64::NAN, f64::NAN));
                eprintln!(
                    "  feat{j}: pred=({:.2},{:.2}) aligned=({:.2},{:.2}) a={:.3} b={:.2} warp_drift={:.4} rho={:.3}",
                    pred.0,
                    pred.1,
                    track.last_pixel.u,
                    track.last_pixel.v,
                    track.patch.a,
                    track.patch.b,
                    (track.warp - Matrix2::identity()).norm(),
                    self.state.features[j].rho
                );
            }
        }

        // Split borrows: observations reference the tracks while the update
        // mutates state and covariance.
        let observations: Vec<Option<FeatureObservation>> = self
            .tracks
            .iter()
            .zip(weights.iter())
            .map(|(track, w)| {
                if !track.aligned {
                    return None;
                }
                w.map(|weight| FeatureObservation {
                    patch: &track.patch,
                    warp: track.warp,
                    weight,
                })
            })
            .collect();
        let outcome = iterated_update(
            &self.cam,
            &mut self.state,
            &mut self.cov,
            &pyr,
            &observations,
            &self.update_cfg,
        );
        drop(observations);
        if self.cfg.paranoid {
            self.hygiene_check("update");
        }

        if std::env::var_os("REFVIO_N_GRAD").is_some() {
            // Raw correlation of post-update residuals with the (unscaled)
            // refractive-index direction; a debug probe for systematic bias.
            let mut g = 0.0;
            let mut rows = 0;
            for (j, track) in self.tracks.iter().enumerate() {
                if !track.aligned {
                    continue;
                }
                let obs = FeatureObservation { patch: &track.patch, warp: track.warp, weight: 1.0 };
                if let Ok(inn) = crate::filter::feature_innovation(&self.cam, &self.state, j, &obs, &pyr)
                {
                    let r = (inn.predicted_pixel.u - self.image_center.u)
                        .hypot(inn.predicted_pixel.v - self.image_center.v)
                        / self.half_diagonal;
                    let contrib = inn.h_n.dot(&inn.y);
                    let scale = inn.h_n.norm_squared().max(1e-12);
                    let dir_world = self.state.q
                        * (self.state.z.inverse()
                            * self.state.features[j].bearing.into_inner());
                    let kind = if dir_world.z < -0.15 { "floor" } else { "wall" };
                    eprintln!(
                        "    ngrad-feat r={r:.2} {kind} w={:.3} pseudo_dn={:+.5}",
                        scale.sqrt(),
                        -contrib / scale
                    );
                    g += contrib;
                    rows += inn.rank;
                }
            }
            eprintln!("  n-grad: {g:10.2} over {rows} rows");
        }
        self.score_tracks(&outcome.statuses);
        self.refresh_tracks(&pyr);
        self.prune_features();
        self.detect_new_features(&pyr);
        if self.cfg.paranoid {
            self.hygiene_check("manage");
        }

        Some(StateRecord {
            t_ns,
            position: self.state.world_position(),
            attitude: self.state.q,
            n: self.state.n,
            n_std: self.cov.matrix[(IDX_N, IDX_N)].max(0.0).sqrt(),
            num_features: self.state.features.len(),
        })
    }

    /// Advance per-feature warps and pre-align each patch on the new frame.
    fn track_features(&mut self, pyr: &ImagePyramid, frame_motion: &RelativeMotion) {
        let n = self.n_index();
        for (j, track) in self.tracks.iter_mut().enumerate() {
            track.age += 1;
            track.aligned = false;
            if let Ok(step) = compute_warp(
                &self.cam,
                n,
                &frame_motion.rotation,
                &frame_motion.translation,
                &track.prev_bearing,
                track.prev_rho,
                track.last_pixel,
            ) {
                track.warp = step * track.warp;
            }
            let feat = &self.state.features[j];
            let Ok(predicted) = self.cam.project(n, &feat.bearing.into_inner()) else {
                continue;
            };
            let trace_prealign = std::env::var_os("REFVIO_PREALIGN_TRACE").is_some();
            match prealign(&track.patch, pyr, predicted, &track.warp) {
                // Illumination cannot plausibly jump between consecutive
                // frames; implausible fits mean the alignment locked onto the
                // wrong basin and the patch must sit this update out.
                Ok(res) if (0.5..=2.0).contains(&res.a) && res.b.abs() <= 40.0 => {
                    if trace_prealign {
                        let du = res.pixel.u - predicted.u;
                        let dv = res.pixel.v - predicted.v;
                        let rx = predicted.u - self.image_center.u;
                        let ry = predicted.v - self.image_center.v;
                        let rn = (rx * rx + ry * ry).sqrt().max(1e-9);
                        eprintln!(
                            "    prealign-dr radial={:+.4} tangential={:+.4}",
                            (du * rx + dv * ry) / rn,
                            (du * ry - dv * rx) / rn
                        );
                    }
                    track.patch.a = res.a;
                    track.patch.b = res.b;
                    track.last_pixel = res.pixel;
                    track.quality = QUALITY_DECAY * track.quality + (1.0 - QUALITY_DECAY);
                    track.aligned = true;
                }
                _ => {
                    track.quality *= QUALITY_DECAY;
                    track.last_pixel = predicted;
                }
            }
        }
    }

    /// Sensitivity weight per landmark; `None` marks landmarks with no usable
    /// projection this frame.
    fn sensitivity_weights(&self, frame_motion: &RelativeMotion) -> Vec<Option<f64>> {
        let n = self.n_index();
        let essential = essential_matrix(frame_motion).ok();
        self.state
            .features
            .iter()
            .zip(self.tracks.iter().map(|t| t.age))
            .map(|(feat, age)| {
                let Ok(px) = self.cam.project(n, &feat.bearing.into_inner()) else {
                    return None;
                };
                if self.cfg.force_zero_sensitivity || self.cfg.fix_n {
                    return Some(0.0);
                }
                if std::env::var_os("REFVIO_UNIT_WEIGHT").is_some() {
                    return Some(1.0); // debug aid
                }
                if age > N_COUPLING_WINDOW {
                    return Some(0.0);
                }
                let v = match &essential {
                    Some(e) => heuristic_weight(
                        &self.cam,
                        n,
                        e,
                        &feat.bearing,
                        px,
                        self.image_center,
                        self.half_diagonal,
                        &self.cfg.heuristic,
                    ),
                    // Degenerate translation: no epipolar geometry this frame.
                    None => 0.0,
                };
                Some(v)
            })
            .collect()
    }

    fn score_tracks(&mut self, statuses: &[FeatureUpdateStatus]) {
        for (track, status) in self.tracks.iter_mut().zip(statuses.iter()) {
            match status {
                FeatureUpdateStatus::Used => {
                    track.quality = QUALITY_DECAY * track.quality + (1.0 - QUALITY_DECAY);
                }
                FeatureUpdateStatus::Outlier
                | FeatureUpdateStatus::Degenerate
                | FeatureUpdateStatus::OutOfView => track.quality *= QUALITY_DECAY,
                FeatureUpdateStatus::ProjectionFailed => track.quality = 0.0,
                FeatureUpdateStatus::NoObservation => {}
            }
        }
    }

    /// Post-update track bookkeeping: store the posterior bearing for the
    /// next warp step and re-extract patches whose warp drifted.
    fn refresh_tracks(&mut self, pyr: &ImagePyramid) {
        let n = self.n_index();
        for (j, track) in self.tracks.iter_mut().enumerate() {
            let feat = &self.state.features[j];
            track.prev_bearing = feat.bearing;
            track.prev_rho = feat.rho;
            if let Ok(px) = self.cam.project(n, &feat.bearing.into_inner()) {
                track.last_pixel = px;
                let drift = (track.warp - Matrix2::identity()).norm();
                if drift > WARP_RESET {
                    if let Ok(patch) =
                        extract_patch(pyr, px, self.cfg.patch_size, self.cfg.pyramid_levels)
                    {
                        track.patch = patch;
                        track.warp = Matrix2::identity();
                    }
                }
            }
        }
    }

    fn prune_features(&mut self) {
        let mut j = 0;
        while j < self.state.features.len() {
            let feat = &self.state.features[j];
            let track = &self.tracks[j];
            let behind = feat.bearing.z <= 0.05;
            let hopeless = track.quality < QUALITY_PRUNE && track.age >= QUALITY_MIN_AGE;
            let dead = track.quality == 0.0;
            let lifetime =
                TRACK_LIFETIME + TRACK_LIFETIME_STAGGER * (track.id % 20) as u32;
            let retired = track.age > lifetime;
            if behind || hopeless || dead || retired {
                self.state.features.remove(j);
                self.tracks.remove(j);
                self.cov.remove_feature_block(j);
            } else {
                j += 1;
            }
        }
    }

    /// Tangent-coordinate derivative of the unprojected bearing with respect
    /// to the refractive index. Central differences except at the n >= 1
    /// domain edge.
    fn unproject_n_sensitivity(&self, px: PixelPoint) -> Option<nalgebra::Vector2<f64>> {
        let n = self.state.n.max(1.0);
        let eps = 1e-5;
        let base = self.cam.unproject(RefractiveIndex::new(n), px).ok()?;
        let hi = self.cam.unproject(RefractiveIndex::new(n + eps), px).ok()?;
        if n - eps >= 1.0 {
            let lo = self.cam.unproject(RefractiveIndex::new(n - eps), px).ok()?;
            let (h1, h2) = crate::math::bearing_boxminus(&hi, &base);
            let (l1, l2) = crate::math::bearing_boxminus(&lo, &base);
            Some(nalgebra::Vector2::new((h1 - l1) / (2.0 * eps), (h2 - l2) / (2.0 * eps)))
        } else {
            let (h1, h2) = crate::math::bearing_boxminus(&hi, &base);
            Some(nalgebra::Vector2::new(h1 / eps, h2 / eps))
        }
    }

    fn detect_new_features(&mut self, pyr: &ImagePyramid) {
        let capacity = self.cfg.max_features.saturating_sub(self.state.features.len());
        if capacity == 0 {
            return;
        }
        let n = self.n_index();
        let existing: Vec<PixelPoint> = self.tracks.iter().map(|t| t.last_pixel).collect();
        let params = DetectParams { max_features: capacity, ..self.detect };
        let found = detect_features(pyr.level(0), &existing, &params);
        // The initialization-time correlation between the bearing and the
        // refractive index is what lets later updates attribute systematic
        // radial residuals to n. The decoupling test hook severs it.
        let couple_n = !(self.cfg.force_zero_sensitivity
            || self.cfg.fix_n
            || std::env::var_os("REFVIO_NO_COUPLE").is_some());
        for px in found {
            let Ok(bearing) = self.cam.unproject(n, px) else { continue };
            let Ok(patch) = extract_patch(pyr, px, self.cfg.patch_size, self.cfg.pyramid_levels)
            else {
                continue;
            };
            let n_sens = if couple_n { self.unproject_n_sensitivity(px) } else { None };
            self.state.features.push(FeatureState { bearing, rho: self.cfg.rho_prior });
            let sigma_bearing = self.cfg.sigma_bearing_px / self.cam.intrinsics.fx;
            self.cov.push_feature_block(sigma_bearing, self.cfg.sigma_rho, n_sens);
            let id = self.next_track_id;
            self.next_track_id += 1;
            self.tracks.push(Track {
                patch,
                warp: Matrix2::identity(),
                last_pixel: px,
                prev_bearing: bearing,
                prev_rho: self.cfg.rho_prior,
                quality: 0.5,
                age: 0,
                id,
                aligned: false,
            });
        }
    }
}

/// Output of a dataset run.
pub struct RunOutput {
    pub records: Vec<StateRecord>,
}

/// Drive the estimator over a dataset in timestamp order.
pub fn run_estimator(dataset: &Dataset, cfg: &RunConfig) -> Result<RunOutput, IoError> {
    let cal = &dataset.calibration;
    let mut estimator = Estimator::new(
        cal.camera(),
        cal.cam_position_in_body(),
        UnitQuaternion::from_rotation_matrix(&cal.rot_cam_from_body()),
        (cal.image_width, cal.image_height),
        cal.noise_config(),
        cfg.clone(),
    );
    let mut records = Vec::with_capacity(dataset.frames.len());
    let mut imu_iter = dataset.imu.iter().peekable();
    for (idx, frame) in dataset.frames.iter().enumerate() {
        while let Some((t_ns, imu)) = imu_iter.peek() {
            if *t_ns > frame.t_ns {
                break;
            }
            estimator.process_imu(imu);
            imu_iter.next();
        }
        let image = dataset.load_frame(idx)?;
        if let Some(record) = estimator.process_frame(frame.t_ns, &image) {
            records.push(record);
        }
    }
    Ok(RunOutput { records })
}

pub use crate::sim::PoseProvider;
