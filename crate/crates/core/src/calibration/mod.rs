//! Everything fitted from gesture logs: per-key endpoint statistics, the
//! per-thumb affine transfer function and the synthetic default profile.

mod timing;

pub use timing::{derive_timing_table, TimingError, TimingReport, TimingTable, TAP_IN_PLACE_MS, VISUAL_REACTION_MS};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::Layout;
use crate::log::GestureLogRecord;
use crate::recognizer::DEFAULT_TAP_THRESHOLD_MM;
use crate::types::{KeyId, NormalizedEndpoint, PadSpec, Thumb};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;
/// Added to every fitted covariance diagonal, in mm².
pub const COVARIANCE_EPSILON: f64 = 0.01;
/// Minimum records per (key, thumb) group, before and after filtering.
pub const MIN_GROUP_SIZE: usize = 3;
/// Minimum records per thumb for the transfer regression.
pub const MIN_TRANSFER_RECORDS: usize = 6;
/// Stroke length per key unit used by the synthetic profile.
pub const DEFAULT_KAPPA_MM: f64 = 12.0;
pub const DEFAULT_SPREAD_MM: f64 = 3.0;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{thumb} thumb has {got} usable records, need at least {need}")]
    NotEnoughData { thumb: Thumb, got: usize, need: usize },
    #[error("{0} thumb endpoints are collinear; the transfer regression is rank-deficient")]
    RankDeficient(Thumb),
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
    #[error("profile schema version {0} is not supported")]
    SchemaVersion(u32),
    #[error("profile has no model for {0}")]
    Unreachable(KeyId),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Bivariate Gaussian over the normalized endpoints of one key and thumb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEndpointModel {
    pub key: KeyId,
    pub thumb: Thumb,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub sample_count: usize,
}

impl KeyEndpointModel {
    pub fn isotropic(key: KeyId, thumb: Thumb, mean: [f64; 2], variance: f64, sample_count: usize) -> Self {
        Self {
            key,
            thumb,
            mean,
            cov: [[variance, 0.0], [0.0, variance]],
            sample_count,
        }
    }

    fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// True when the 2×2 Cholesky factorisation exists.
    pub fn is_positive_definite(&self) -> bool {
        let [[a, b], [c, d]] = self.cov;
        a > 0.0 && b == c && a * d - b * c > 0.0
    }

    /// Log density of an endpoint, per mm².
    pub fn log_density(&self, e: NormalizedEndpoint) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = self.det();
        let (x, y) = (e.dx - self.mean[0], e.dy - self.mean[1]);
        let quad = (d * x * x - 2.0 * b * x * y + a * y * y) / det;
        -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * quad
    }

    pub fn density(&self, e: NormalizedEndpoint) -> f64 {
        self.log_density(e).exp()
    }

    pub fn mean_endpoint(&self) -> NormalizedEndpoint {
        NormalizedEndpoint::new(self.mean[0], self.mean[1])
    }
}

/// Affine map from a normalized endpoint (mm) to keyboard coordinates (key
/// units): `x = dx·a_x + dy·b_x + c_x`, `y = dx·a_y + dy·b_y + c_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferFn {
    pub thumb: Thumb,
    pub a_x: f64,
    pub b_x: f64,
    pub c_x: f64,
    pub a_y: f64,
    pub b_y: f64,
    pub c_y: f64,
}

impl TransferFn {
    pub fn apply(&self, e: NormalizedEndpoint) -> (f64, f64) {
        (
            e.dx * self.a_x + e.dy * self.b_x + self.c_x,
            e.dx * self.a_y + e.dy * self.b_y + self.c_y,
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.a_x, self.b_x, self.c_x, self.a_y, self.b_y, self.c_y]
            .iter()
            .all(|v| v.is_finite())
    }
}

pub fn apply_transfer(tf: &TransferFn, e: NormalizedEndpoint) -> (f64, f64) {
    tf.apply(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPair {
    pub left: TransferFn,
    pub right: TransferFn,
}

impl TransferPair {
    pub fn get(&self, thumb: Thumb) -> &TransferFn {
        match thumb {
            Thumb::Left => &self.left,
            Thumb::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub schema_version: u32,
    pub pad: PadSpec,
    pub tap_threshold_mm: f64,
    pub tap_grid: [u8; 2],
    pub transfer: TransferPair,
    pub models: Vec<KeyEndpointModel>,
}

impl CalibrationProfile {
    pub fn new(pad: PadSpec, transfer: TransferPair, mut models: Vec<KeyEndpointModel>) -> Self {
        models.sort_by_key(|m| (m.thumb, m.key));
        Self {
            schema_version: PROFILE_SCHEMA_VERSION,
            pad,
            tap_threshold_mm: DEFAULT_TAP_THRESHOLD_MM,
            tap_grid: [3, 3],
            transfer,
            models,
        }
    }

    pub fn model(&self, key: KeyId, thumb: Thumb) -> Option<&KeyEndpointModel> {
        self.models
            .binary_search_by_key(&(thumb, key), |m| (m.thumb, m.key))
            .ok()
            .map(|i| &self.models[i])
    }

    pub fn models_for(&self, thumb: Thumb) -> impl Iterator<Item = &KeyEndpointModel> {
        self.models.iter().filter(move |m| m.thumb == thumb)
    }

    /// Every letter must have a model for at least one thumb.
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(CalibrationError::SchemaVersion(self.schema_version));
        }
        for k in KeyId::letters() {
            if self.model(k, Thumb::Left).is_none() && self.model(k, Thumb::Right).is_none() {
                return Err(CalibrationError::Unreachable(k));
            }
        }
        Ok(())
    }

    /// Pretty JSON with object keys sorted, so output is byte-stable.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("profile serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, CalibrationError> {
        let mut p: CalibrationProfile = serde_json::from_str(s)?;
        p.models.sort_by_key(|m| (m.thumb, m.key));
        p.validate()?;
        Ok(p)
    }
}

/// Synthetic profile: every letter is reachable from both start keys with a
/// mean endpoint of `kappa_mm · (key − start)` and isotropic spread; the
/// transfer functions invert that scaling exactly.
pub fn synth_profile(layout: &Layout, pad: PadSpec, kappa_mm: f64, spread_mm: f64) -> CalibrationProfile {
    let mut models = Vec::with_capacity(52);
    let tf = |thumb| {
        let (sx, sy) = layout.start_position(thumb);
        TransferFn {
            thumb,
            a_x: 1.0 / kappa_mm,
            b_x: 0.0,
            c_x: sx,
            a_y: 0.0,
            b_y: 1.0 / kappa_mm,
            c_y: sy,
        }
    };
    for thumb in Thumb::BOTH {
        let (sx, sy) = layout.start_position(thumb);
        for key in KeyId::letters() {
            let (kx, ky) = layout.key_position(key).expect("letters have positions");
            models.push(KeyEndpointModel::isotropic(
                key,
                thumb,
                [kappa_mm * (kx - sx), kappa_mm * (ky - sy)],
                spread_mm * spread_mm,
                0,
            ));
        }
    }
    CalibrationProfile::new(
        pad,
        TransferPair {
            left: tf(Thumb::Left),
            right: tf(Thumb::Right),
        },
        models,
    )
}

pub fn default_profile() -> CalibrationProfile {
    synth_profile(&Layout::qwerty(), PadSpec::default(), DEFAULT_KAPPA_MM, DEFAULT_SPREAD_MM)
}

/// A (key, thumb) group dropped from the fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmittedGroup {
    pub key: KeyId,
    pub thumb: Thumb,
    pub records: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointStats {
    pub models: Vec<KeyEndpointModel>,
    pub omitted: Vec<OmittedGroup>,
    /// Indices (into the input log) of records that passed the filter and
    /// belong to a retained group.
    pub survivors: Vec<usize>,
    pub considered: usize,
}

impl EndpointStats {
    pub fn retention(&self) -> f64 {
        if self.considered == 0 {
            0.0
        } else {
            self.survivors.len() as f64 / self.considered as f64
        }
    }
}

fn mean_cov(points: &[NormalizedEndpoint]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.dx).sum::<f64>() / n;
    let my = points.iter().map(|p| p.dy).sum::<f64>() / n;
    if points.len() < 2 {
        return ([mx, my], [[0.0; 2]; 2]);
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (x, y) = (p.dx - mx, p.dy - my);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let d = n - 1.0;
    ([mx, my], [[sxx / d, sxy / d], [sxy / d, syy / d]])
}

/// Indices of points within two radial standard deviations of the mean,
/// where the scalar deviation is `sqrt(trace(cov) / 2)`. One pass.
pub fn two_sigma_survivors(points: &[NormalizedEndpoint]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let (mean, cov) = mean_cov(points);
    let sd = ((cov[0][0] + cov[1][1]) / 2.0).sqrt();
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let d = (p.dx - mean[0]).hypot(p.dy - mean[1]);
            d < 2.0 * sd || d == 0.0
        })
        .map(|(i, _)| i)
        .collect()
}

/// Per-(key, thumb) endpoint statistics with one-pass 2σ outlier rejection.
///
/// Only records whose target is a letter are considered. Groups with fewer
/// than three records, or fewer than three survivors, are omitted and
/// listed in the result.
pub fn endpoint_stats(log: &[GestureLogRecord], pad: &PadSpec) -> Result<EndpointStats, CalibrationError> {
    let mut groups: BTreeMap<(Thumb, KeyId), Vec<(usize, NormalizedEndpoint)>> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        let Some(key) = rec.target_key.filter(|k| k.is_letter()) else {
            continue;
        };
        let g = rec.gesture().map_err(|e| CalibrationError::BadRecord {
            index,
            reason: e.to_string(),
        })?;
        let thumb = rec
            .thumb_or_inferred(pad)
            .expect("validated gestures have a first sample");
        groups
            .entry((thumb, key))
            .or_default()
            .push((index, g.normalized_endpoint()));
    }

    let mut out = EndpointStats {
        models: Vec::new(),
        omitted: Vec::new(),
        survivors: Vec::new(),
        considered: 0,
    };
    for ((thumb, key), members) in groups {
        out.considered += members.len();
        let points: Vec<_> = members.iter().map(|&(_, e)| e).collect();
        let keep = if points.len() >= MIN_GROUP_SIZE {
            two_sigma_survivors(&points)
        } else {
            Vec::new()
        };
        if keep.len() < MIN_GROUP_SIZE {
            log::warn!(
                "omitting {key}/{thumb}: {} records, {} survivors",
                points.len(),
                keep.len()
            );
            out.omitted.push(OmittedGroup {
                key,
                thumb,
                records: points.len(),
                survivors: keep.len(),
            });
            continue;
        }
        let kept: Vec<_> = keep.iter().map(|&i| points[i]).collect();
        let (mean, mut cov) = mean_cov(&kept);
        cov[0][0] += COVARIANCE_EPSILON;
        cov[1][1] += COVARIANCE_EPSILON;
        out.survivors.extend(keep.iter().map(|&i| members[i].0));
        out.models.push(KeyEndpointModel {
            key,
            thumb,
            mean,
            cov,
            sample_count: kept.len(),
        });
    }
    out.survivors.sort_unstable();
    log::info!("endpoint filter retained {:.1}% of strokes", 100.0 * out.retention());
    Ok(out)
}

/// Ordinary least squares fit of `target = dx·a + dy·b + c` for one axis.
fn ols(design: &DMatrix<f64>, target: &DVector<f64>) -> Option<[f64; 3]> {
    let svd = design.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max.is_nan() || max <= 0.0 || min / max < 1e-10 {
        return None;
    }
    let sol = svd.solve(target, 0.0).ok()?;
    Some([sol[0], sol[1], sol[2]])
}

/// An endpoint and the key center it was aimed at.
pub type TransferRow = (NormalizedEndpoint, (f64, f64));

/// Least-squares affine map from endpoints to display targets, with the x
/// and y equations fitted independently.
pub fn fit_affine(
    thumb: Thumb,
    rows: &[TransferRow],
) -> Result<TransferFn, CalibrationError> {
    if rows.len() < MIN_TRANSFER_RECORDS {
        return Err(CalibrationError::NotEnoughData {
            thumb,
            got: rows.len(),
            need: MIN_TRANSFER_RECORDS,
        });
    }
    let design = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => rows[i].0.dx,
        1 => rows[i].0.dy,
        _ => 1.0,
    });
    let tx = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1 .0));
    let ty = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1 .1));
    let [a_x, b_x, c_x] = ols(&design, &tx).ok_or(CalibrationError::RankDeficient(thumb))?;
    let [a_y, b_y, c_y] = ols(&design, &ty).ok_or(CalibrationError::RankDeficient(thumb))?;
    Ok(TransferFn {
        thumb,
        a_x,
        b_x,
        c_x,
        a_y,
        b_y,
        c_y,
    })
}

/// Fits one transfer function per thumb by least squares on
/// (normalized endpoint → target key center) pairs.
pub fn fit_transfer(
    log: &[GestureLogRecord],
    layout: &Layout,
    pad: &PadSpec,
) -> Result<TransferPair, CalibrationError> {
    let mut per_thumb: BTreeMap<Thumb, Vec<TransferRow>> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        let Some(key) = rec.target_key.filter(|k| k.is_letter()) else {
            continue;
        };
        let g = rec.gesture().map_err(|e| CalibrationError::BadRecord {
            index,
            reason: e.to_string(),
        })?;
        let thumb = rec.thumb_or_inferred(pad).expect("nonempty gesture");
        let target = layout.key_position(key).expect("letter");
        per_thumb
            .entry(thumb)
            .or_default()
            .push((g.normalized_endpoint(), target));
    }
    let fit = |thumb: Thumb| fit_affine(thumb, per_thumb.get(&thumb).map(Vec::as_slice).unwrap_or(&[]));
    Ok(TransferPair {
        left: fit(Thumb::Left)?,
        right: fit(Thumb::Right)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub retention: f64,
    pub considered: usize,
    pub retained: usize,
    pub omitted: Vec<OmittedGroup>,
}

/// Full calibration: filter endpoints, build per-key Gaussians, then fit the
/// transfer functions on the surviving strokes.
pub fn fit_profile(
    log: &[GestureLogRecord],
    layout: &Layout,
    pad: PadSpec,
) -> Result<(CalibrationProfile, FitReport), CalibrationError> {
    let stats = endpoint_stats(log, &pad)?;
    let kept: Vec<_> = stats.survivors.iter().map(|&i| log[i].clone()).collect();
    let transfer = fit_transfer(&kept, layout, &pad)?;
    let report = FitReport {
        retention: stats.retention(),
        considered: stats.considered,
        retained: stats.survivors.len(),
        omitted: stats.omitted.clone(),
    };
    let profile = CalibrationProfile::new(pad, transfer, stats.models);
    profile.validate()?;
    Ok((profile, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gesture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn stroke_record(key: char, thumb: Thumb, start: (f64, f64), e: (f64, f64)) -> GestureLogRecord {
        let g = Gesture::from_points(&[(start.0, start.1, 0.0), (start.0 + e.0, start.1 + e.1, 200.0)]).unwrap();
        let mut r = GestureLogRecord::from_gesture(&g);
        r.target_key = KeyId::letter(key);
        r.thumb = Some(thumb);
        r
    }

    #[test]
    fn constant_points_give_epsilon_covariance() {
        let log: Vec<_> = (0..100).map(|_| stroke_record('q', Thumb::Left, (40.0, 30.0), (-15.0, -6.0))).collect();
        let stats = endpoint_stats(&log, &PadSpec::default()).unwrap();
        assert_eq!(stats.models.len(), 1);
        let m = &stats.models[0];
        assert!((m.mean[0] + 15.0).abs() < 1e-12 && (m.mean[1] + 6.0).abs() < 1e-12);
        assert_eq!(m.cov, [[COVARIANCE_EPSILON, 0.0], [0.0, COVARIANCE_EPSILON]]);
        assert_eq!(stats.survivors.len(), 100);
    }

    #[test]
    fn single_far_outlier_is_dropped() {
        // Raw mean x = 11.9, sample var_x = (99·1.9² + 188.1²)/99 ≈ 361,
        // var_y = 0, so the radial SD is √180.5 ≈ 13.4 and the cut-off
        // ≈ 26.9 mm: the outlier at distance 188.1 goes, the rest stay.
        let mut log: Vec<_> = (0..99).map(|_| stroke_record('f', Thumb::Left, (30.0, 30.0), (10.0, 0.0))).collect();
        log.push(stroke_record('f', Thumb::Left, (30.0, 30.0), (200.0, 0.0)));
        let stats = endpoint_stats(&log, &PadSpec::default()).unwrap();
        let m = &stats.models[0];
        assert_eq!(m.sample_count, 99);
        assert!((m.mean[0] - 10.0).abs() < 1e-12 && m.mean[1].abs() < 1e-12);
        assert!(!stats.survivors.contains(&99));
    }

    #[test]
    fn small_groups_are_omitted_and_reported() {
        let log = vec![
            stroke_record('z', Thumb::Left, (30.0, 30.0), (-6.0, 12.0)),
            stroke_record('z', Thumb::Left, (30.0, 30.0), (-6.0, 12.0)),
        ];
        let stats = endpoint_stats(&log, &PadSpec::default()).unwrap();
        assert!(stats.models.is_empty());
        assert_eq!(stats.omitted.len(), 1);
        assert_eq!(stats.omitted[0].records, 2);
    }

    #[test]
    fn gaussian_covariances_are_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 2.0).unwrap();
        let mut log = Vec::new();
        for key in "qwertasdfg".chars() {
            for _ in 0..40 {
                log.push(stroke_record(key, Thumb::Left, (40.0, 30.0), (n.sample(&mut rng) + 5.0, n.sample(&mut rng))));
            }
        }
        let stats = endpoint_stats(&log, &PadSpec::default()).unwrap();
        assert_eq!(stats.models.len(), 10);
        for m in &stats.models {
            assert!(m.is_positive_definite(), "{m:?}");
            assert_eq!(m.cov[0][1], m.cov[1][0]);
        }
        // 2-D Gaussian with a radial 2σ cut keeps roughly 1 − e^{-2} ≈ 86%
        // to 95% depending on the SD convention; just check it is sane.
        let r = stats.retention();
        assert!((0.75..=1.0).contains(&r), "{r}");
    }

    #[test]
    fn refiltering_survivors_is_not_idempotent() {
        // One-pass filtering is not idempotent in general: the survivors'
        // SD shrinks. Measure how many survivors a second pass would drop.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut dropped = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let pts: Vec<_> = (0..200)
                .map(|_| NormalizedEndpoint::new(n.sample(&mut rng), n.sample(&mut rng)))
                .collect();
            let keep = two_sigma_survivors(&pts);
            let kept: Vec<_> = keep.iter().map(|&i| pts[i]).collect();
            let again = two_sigma_survivors(&kept);
            dropped += kept.len() - again.len();
            total += kept.len();
        }
        let frac = dropped as f64 / total as f64;
        eprintln!("second 2σ pass drops {:.2}% of first-pass survivors", 100.0 * frac);
        assert!(frac > 0.0 && frac < 0.15, "{frac}");
    }

    #[test]
    fn density_normalisation() {
        let m = KeyEndpointModel::isotropic(KeyId::Letter(b'a'), Thumb::Left, [1.0, 2.0], 9.0, 0);
        let at_mean = m.density(NormalizedEndpoint::new(1.0, 2.0));
        assert!((at_mean - 1.0 / (2.0 * PI * 9.0)).abs() < 1e-15);
        // Crude quadrature over ±8σ integrates to ~1.
        let h = 0.1;
        let mut total = 0.0;
        let mut x = -23.0;
        while x < 25.0 {
            let mut y = -22.0;
            while y < 26.0 {
                total += m.density(NormalizedEndpoint::new(x, y)) * h * h;
                y += h;
            }
            x += h;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn synth_profile_round_trips_every_key() {
        let layout = Layout::qwerty();
        let p = default_profile();
        p.validate().unwrap();
        for thumb in Thumb::BOTH {
            let tf = p.transfer.get(thumb);
            let start = p.model(layout.start_key(thumb), thumb).unwrap();
            assert_eq!(start.mean, [0.0, 0.0]);
            assert_eq!(tf.apply(NormalizedEndpoint::default()), layout.start_position(thumb));
            for key in KeyId::letters() {
                let m = p.model(key, thumb).unwrap();
                let (x, y) = tf.apply(m.mean_endpoint());
                let (kx, ky) = layout.key_position(key).unwrap();
                assert!((x - kx).abs() < 1e-12 && (y - ky).abs() < 1e-12, "{key}");
                assert_eq!(layout.nearest_letter(x, y), key);
            }
        }
    }

    #[test]
    fn nearest_mean_of_noiseless_synthetic_strokes() {
        let p = default_profile();
        for thumb in Thumb::BOTH {
            for key in KeyId::letters() {
                let e = p.model(key, thumb).unwrap().mean_endpoint();
                let nearest = p
                    .models_for(thumb)
                    .min_by(|a, b| {
                        let da = (a.mean[0] - e.dx).hypot(a.mean[1] - e.dy);
                        let db = (b.mean[0] - e.dx).hypot(b.mean[1] - e.dy);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                assert_eq!(nearest.key, key);
            }
        }
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        // All endpoints identical: the design matrix has rank 1.
        let log: Vec<_> = (0..10)
            .flat_map(|_| {
                [
                    stroke_record('f', Thumb::Left, (30.0, 30.0), (12.0, 0.0)),
                    stroke_record('j', Thumb::Right, (100.0, 30.0), (-12.0, 0.0)),
                ]
            })
            .collect();
        assert!(matches!(
            fit_transfer(&log, &Layout::qwerty(), &PadSpec::default()),
            Err(CalibrationError::RankDeficient(Thumb::Left))
        ));
        let short: Vec<_> = log.into_iter().take(4).collect();
        assert!(matches!(
            fit_transfer(&short, &Layout::qwerty(), &PadSpec::default()),
            Err(CalibrationError::NotEnoughData { .. })
        ));
    }

    #[test]
    fn fit_transfer_recovers_map_from_key_targets() {
        // Endpoints constructed by inverting a known map at each key center.
        let layout = Layout::qwerty();
        let truth = |thumb| TransferFn { thumb, a_x: 0.08, b_x: -0.01, c_x: 2.5, a_y: 0.02, b_y: 0.09, c_y: 1.0 };
        let mut log = Vec::new();
        for thumb in Thumb::BOTH {
            let t = truth(thumb);
            let det = t.a_x * t.b_y - t.b_x * t.a_y;
            for key in KeyId::letters() {
                let (kx, ky) = layout.key_position(key).unwrap();
                let (x, y) = (kx - t.c_x, ky - t.c_y);
                let e = ((t.b_y * x - t.b_x * y) / det, (-t.a_y * x + t.a_x * y) / det);
                let start = if thumb == Thumb::Left { (30.0, 30.0) } else { (100.0, 30.0) };
                log.push(stroke_record(key.as_char().unwrap(), thumb, start, e));
            }
        }
        let pair = fit_transfer(&log, &layout, &PadSpec::default()).unwrap();
        for thumb in Thumb::BOTH {
            let got = pair.get(thumb);
            let want = truth(thumb);
            for (g, w) in [(got.a_x, want.a_x), (got.b_x, want.b_x), (got.c_x, want.c_x), (got.a_y, want.a_y), (got.b_y, want.b_y), (got.c_y, want.c_y)] {
                assert!((g - w).abs() < 1e-9, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn fit_profile_end_to_end() {
        let layout = Layout::qwerty();
        let synth = default_profile();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, 2.0).unwrap();
        let mut log = Vec::new();
        for thumb in Thumb::BOTH {
            let start = if thumb == Thumb::Left { (40.0, 30.0) } else { (95.0, 30.0) };
            for key in KeyId::letters().filter(|k| layout.thumb_for(*k) == Some(thumb)) {
                let m = synth.model(key, thumb).unwrap();
                for _ in 0..20 {
                    let e = (m.mean[0] + n.sample(&mut rng), m.mean[1] + n.sample(&mut rng));
                    log.push(stroke_record(key.as_char().unwrap(), thumb, start, e));
                }
            }
        }
        let (profile, report) = fit_profile(&log, &layout, PadSpec::default()).unwrap();
        assert!(report.retention > 0.8 && report.retention <= 1.0);
        assert_eq!(profile.models.len(), 26);
        let tf = profile.transfer.get(Thumb::Left);
        assert!((tf.a_x - 1.0 / DEFAULT_KAPPA_MM).abs() < 0.01);
        assert!((tf.c_x - 2.5).abs() < 0.1);
    }

    #[test]
    fn profile_json_is_stable() {
        let p = default_profile();
        let json = p.to_json();
        let back = CalibrationProfile::from_json(&json).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), json);
        // Object keys come out sorted.
        let a = json.find("\"models\"").unwrap();
        let b = json.find("\"pad\"").unwrap();
        let c = json.find("\"schema_version\"").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn profile_rejects_unknown_schema() {
        let mut p = default_profile();
        p.schema_version = 99;
        assert!(matches!(CalibrationProfile::from_json(&p.to_json()), Err(CalibrationError::SchemaVersion(99))));
    }
}
