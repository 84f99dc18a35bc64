//! Speed differentiation and wavelet-based trajectory denoising.
//!
//! Denoising keeps only the approximation content of a multilevel db6
//! decomposition: details are zeroed and the signal is rebuilt from what the
//! approximation bands can represent. The rebuild is computed as an
//! orthogonal projection onto the span of the zero-detail reconstructions,
//! which makes the operator exactly idempotent and non-expansive; a plain
//! truncated synthesis cascade drifts on reapplication because the
//! boundary-extended transform is redundant.

use crate::model::TrajectoryRecord;
use nalgebra::DMatrix;
use thiserror::Error;

/// A uniformly sampled real series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Vec<f64>,
    /// Seconds per sample.
    pub dt: f64,
}

impl Series {
    pub fn new(values: Vec<f64>, dt: f64) -> Self {
        Self { values, dt }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// db6 reconstruction low-pass (scaling) filter.
const DB6_REC_LO: [f64; 12] = [
    0.11154074335008017,
    0.4946238903983854,
    0.7511339080215775,
    0.3152503517092432,
    -0.22626469396516913,
    -0.12976686756709563,
    0.09750160558707936,
    0.02752286553001629,
    -0.031582039318031156,
    0.0005538422009938016,
    0.004777257511010651,
    -0.00107730108499558,
];

const FLEN: usize = DB6_REC_LO.len();

/// Near-degenerate boundary reconstruction modes below this fraction of the
/// dominant singular value are dropped from the denoising subspace; they
/// carry almost no interior signal but wild edge oscillations.
const RANK_CUTOFF: f64 = 2e-2;

fn db6_filters() -> ([f64; FLEN], [f64; FLEN], [f64; FLEN], [f64; FLEN]) {
    let rec_lo = DB6_REC_LO;
    let mut rec_hi = [0.0; FLEN];
    for (k, h) in rec_hi.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *h = sign * rec_lo[FLEN - 1 - k];
    }
    let mut dec_lo = rec_lo;
    dec_lo.reverse();
    let mut dec_hi = rec_hi;
    dec_hi.reverse();
    (dec_lo, dec_hi, rec_lo, rec_hi)
}

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("infeasible denoise config: {0}")]
    ConfigInfeasible(String),
}

/// Boundary extension mode for the wavelet transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Half-point symmetric extension: keeps constant signals exact.
    #[default]
    Symmetric,
}

/// Denoising configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    /// Wavelet identifier; only "db6" is implemented.
    pub wavelet: String,
    /// Decomposition depth.
    pub levels: usize,
    pub boundary: BoundaryMode,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            wavelet: "db6".into(),
            levels: 2,
            boundary: BoundaryMode::Symmetric,
        }
    }
}

impl DenoiseConfig {
    fn validate(&self, len: usize) -> Result<(), SignalError> {
        if self.wavelet != "db6" {
            return Err(SignalError::ConfigInfeasible(format!(
                "unsupported wavelet {:?}, only db6 is implemented",
                self.wavelet
            )));
        }
        if self.levels == 0 {
            return Err(SignalError::ConfigInfeasible("levels must be >= 1".into()));
        }
        let max = max_levels(len);
        if self.levels > max {
            return Err(SignalError::ConfigInfeasible(format!(
                "levels = {} exceeds the maximum {} for {} samples",
                self.levels, max, len
            )));
        }
        Ok(())
    }
}

/// Deepest decomposition for which every analysis input still covers the
/// filter length.
pub fn max_levels(len: usize) -> usize {
    let mut n = len;
    let mut levels = 0;
    while n >= FLEN {
        n = (n + FLEN - 1) / 2;
        levels += 1;
    }
    levels
}

/// Half-point symmetric extension index: ... x1 x0 | x0 .. xn-1 | xn-1 ...
fn reflect(mut p: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if p < 0 {
            p = -p - 1;
        } else if p >= n {
            p = 2 * n - 1 - p;
        } else {
            return p as usize;
        }
    }
}

fn dwt_step(x: &[f64], dec_lo: &[f64; FLEN], dec_hi: &[f64; FLEN]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let out_len = (n + FLEN - 1) / 2;
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    for k in 0..out_len {
        let mut a = 0.0;
        let mut d = 0.0;
        for j in 0..FLEN {
            let v = x[reflect(2 * k as isize + 1 - j as isize, n)];
            a += dec_lo[j] * v;
            d += dec_hi[j] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

fn idwt_step(
    approx: &[f64],
    detail: &[f64],
    rec_lo: &[f64; FLEN],
    rec_hi: &[f64; FLEN],
    out_len: usize,
) -> Vec<f64> {
    let m = approx.len();
    let full = 2 * m - FLEN + 2;
    let mut y = vec![0.0; full];
    let half = FLEN / 2;
    for i in half - 1..m {
        let mut even = 0.0;
        let mut odd = 0.0;
        for j in 0..half {
            let a = approx[i - j];
            let d = detail[i - j];
            even += rec_lo[2 * j] * a + rec_hi[2 * j] * d;
            odd += rec_lo[2 * j + 1] * a + rec_hi[2 * j + 1] * d;
        }
        let o = 2 * (i - (half - 1));
        y[o] += even;
        y[o + 1] += odd;
    }
    y.truncate(out_len);
    y
}

/// A multilevel db6 decomposition. `details[0]` is the finest scale.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    /// Input length at each analysis level, needed to undo the redundant
    /// boundary-extended transform.
    level_lens: Vec<usize>,
}

/// Multilevel forward transform with symmetric extension.
pub fn wavedec(x: &[f64], levels: usize) -> Result<Decomposition, SignalError> {
    if x.len() < FLEN {
        return Err(SignalError::TooShort {
            len: x.len(),
            min: FLEN,
        });
    }
    let cfg = DenoiseConfig {
        levels,
        ..DenoiseConfig::default()
    };
    cfg.validate(x.len())?;
    let (dec_lo, dec_hi, _, _) = db6_filters();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut level_lens = Vec::with_capacity(levels);
    for _ in 0..levels {
        level_lens.push(approx.len());
        let (a, d) = dwt_step(&approx, &dec_lo, &dec_hi);
        details.push(d);
        approx = a;
    }
    Ok(Decomposition {
        approx,
        details,
        level_lens,
    })
}

/// Inverse of [`wavedec`]: reconstructs the original samples.
pub fn waverec(dec: &Decomposition) -> Vec<f64> {
    let (_, _, rec_lo, rec_hi) = db6_filters();
    let mut current = dec.approx.clone();
    for (detail, &len) in dec.details.iter().rev().zip(dec.level_lens.iter().rev()) {
        current = idwt_step(&current, detail, &rec_lo, &rec_hi, len);
    }
    current
}

/// Zero-detail denoiser for a fixed series length and config. Construct once
/// and reuse across records of the same length.
#[derive(Debug, Clone)]
pub struct Denoiser {
    len: usize,
    /// Orthonormal basis of the retained approximation subspace, columns.
    basis: DMatrix<f64>,
}

impl Denoiser {
    pub fn new(len: usize, config: &DenoiseConfig) -> Result<Self, SignalError> {
        if len < FLEN {
            return Err(SignalError::TooShort { len, min: FLEN });
        }
        config.validate(len)?;

        // synthesis operator: unit approx coefficient -> zero-detail rebuild
        let probe = wavedec(&vec![0.0; len], config.levels)?;
        let m = probe.approx.len();
        let mut synth = DMatrix::zeros(len, m);
        for j in 0..m {
            let mut dec = probe.clone();
            dec.approx[j] = 1.0;
            let col = waverec(&dec);
            for (i, v) in col.iter().enumerate() {
                synth[(i, j)] = *v;
            }
        }

        let svd = synth.svd(true, false);
        let u = svd.u.as_ref().expect("svd configured to produce u");
        let smax = svd.singular_values.max();

        // orthonormal basis: constant direction first, then the
        // well-conditioned synthesis modes (modified Gram-Schmidt)
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        cols.push(vec![1.0 / (len as f64).sqrt(); len]);
        for j in 0..svd.singular_values.len() {
            if svd.singular_values[j] >= RANK_CUTOFF * smax {
                cols.push(u.column(j).iter().copied().collect());
            }
        }
        let mut basis_cols: Vec<Vec<f64>> = Vec::new();
        for mut c in cols {
            for _ in 0..2 {
                for b in &basis_cols {
                    let dot: f64 = c.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
                    for (ci, bi) in c.iter_mut().zip(b.iter()) {
                        *ci -= dot * bi;
                    }
                }
            }
            let norm: f64 = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for ci in c.iter_mut() {
                    *ci /= norm;
                }
                basis_cols.push(c);
            }
        }
        let k = basis_cols.len();
        let mut basis = DMatrix::zeros(len, k);
        for (j, c) in basis_cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                basis[(i, j)] = *v;
            }
        }
        Ok(Self { len, basis })
    }

    /// Projects `x` onto the retained approximation subspace.
    pub fn denoise(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len, "denoiser built for length {}", self.len);
        let v = nalgebra::DVector::from_column_slice(x);
        let coeffs = self.basis.transpose() * &v;
        (&self.basis * coeffs).iter().copied().collect()
    }
}

/// Central differences at interior samples; one-sided stencils at the two
/// boundaries (third order where the length allows, so smooth oracles hold at
/// the ends too). Exact on linear series everywhere.
pub fn differentiate(s: &Series) -> Result<Series, SignalError> {
    let v = &s.values;
    let n = v.len();
    if n < 2 {
        return Err(SignalError::TooShort { len: n, min: 2 });
    }
    let dt = s.dt;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    match n {
        2 => {
            let d = (v[1] - v[0]) / dt;
            out[0] = d;
            out[1] = d;
        }
        3 => {
            out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
            out[2] = (3.0 * v[2] - 4.0 * v[1] + v[0]) / (2.0 * dt);
        }
        _ => {
            out[0] = (-11.0 * v[0] + 18.0 * v[1] - 9.0 * v[2] + 2.0 * v[3]) / (6.0 * dt);
            out[n - 1] =
                (11.0 * v[n - 1] - 18.0 * v[n - 2] + 9.0 * v[n - 3] - 2.0 * v[n - 4]) / (6.0 * dt);
        }
    }
    Ok(Series {
        values: out,
        dt: s.dt,
    })
}

/// Denoises a series by zeroing every detail band of a `config.levels`-deep
/// db6 decomposition.
pub fn dwt_denoise(s: &Series, config: &DenoiseConfig) -> Result<Series, SignalError> {
    let denoiser = Denoiser::new(s.values.len(), config)?;
    Ok(Series {
        values: denoiser.denoise(&s.values),
        dt: s.dt,
    })
}

/// Denoises the speed series of a record and re-derives acceleration from the
/// denoised speed, so `a = dv/dt` holds in the output. Positions and context
/// fields are returned unchanged.
pub fn denoise_trajectory(
    record: &TrajectoryRecord,
    config: &DenoiseConfig,
) -> Result<TrajectoryRecord, SignalError> {
    let denoiser = Denoiser::new(record.rows.len(), config)?;
    Ok(denoise_trajectory_with(record, &denoiser))
}

/// As [`denoise_trajectory`] but reusing a prebuilt [`Denoiser`].
pub fn denoise_trajectory_with(record: &TrajectoryRecord, denoiser: &Denoiser) -> TrajectoryRecord {
    let speeds = denoiser.denoise(&record.speeds());
    let accel = differentiate(&Series {
        values: speeds.clone(),
        dt: crate::model::DT,
    })
    .expect("record has full length");
    let mut out = record.clone();
    for ((row, v), a) in out.rows.iter_mut().zip(speeds).zip(accel.values) {
        row.speed = v;
        row.accel = a;
    }
    out
}

/// Comparison path: denoises the stored acceleration directly instead of
/// re-deriving it from the denoised speed. The output acceleration is then
/// not the exact derivative of the output speed.
pub fn denoise_trajectory_independent_accel(
    record: &TrajectoryRecord,
    config: &DenoiseConfig,
) -> Result<TrajectoryRecord, SignalError> {
    let denoiser = Denoiser::new(record.rows.len(), config)?;
    let speeds = denoiser.denoise(&record.speeds());
    let accels = denoiser.denoise(&record.accels());
    let mut out = record.clone();
    for ((row, v), a) in out.rows.iter_mut().zip(speeds).zip(accels) {
        row.speed = v;
        row.accel = a;
    }
    Ok(out)
}
