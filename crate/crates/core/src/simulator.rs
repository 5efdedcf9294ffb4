//! Quarter-car suspension as a switching linear system.
//!
//! State `x = [z_s, ż_s, z_u, ż_u]`, road displacement input `z_r`, outputs
//! `[unsprung acceleration, sprung acceleration, z_s − z_u]`. Each working
//! condition is one parameter set, discretized by zero-order hold.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, ChannelRole, TimeSeriesSet};
use crate::error::{Error, Result};

pub const UNSPRUNG_ACCEL: &str = "y_I1_a";
pub const SPRUNG_ACCEL: &str = "y_I2";
pub const RELATIVE_DISPLACEMENT: &str = "y_O";

/// Sampling time of the reference experiment, seconds.
pub const DEFAULT_SAMPLE_TIME: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterCarParams {
    /// Sprung mass, kg.
    pub m_s: f64,
    /// Unsprung mass, kg.
    pub m_u: f64,
    /// Suspension stiffness, N/m.
    pub k_s: f64,
    /// Tire stiffness, N/m.
    pub k_r: f64,
    /// Suspension damping, N·s/m.
    pub c_s: f64,
}

impl QuarterCarParams {
    /// Working condition C1 of the reference experiment.
    pub const C1: QuarterCarParams = QuarterCarParams {
        m_s: 300.0,
        m_u: 40.0,
        k_s: 2.0e4,
        k_r: 1.8e5,
        c_s: 1.5e3,
    };

    /// Working condition C2 of the reference experiment.
    pub const C2: QuarterCarParams = QuarterCarParams {
        m_s: 300.0,
        m_u: 40.0,
        k_s: 4.0e4,
        k_r: 2.0e5,
        c_s: 2.5e3,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m_s", self.m_s),
            ("m_u", self.m_u),
            ("k_s", self.k_s),
            ("k_r", self.k_r),
            ("c_s", self.c_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Every parameter multiplied by the matching factor.
    pub fn scaled(&self, f: [f64; 5]) -> Self {
        Self {
            m_s: self.m_s * f[0],
            m_u: self.m_u * f[1],
            k_s: self.k_s * f[2],
            k_r: self.k_r * f[3],
            c_s: self.c_s * f[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub sample_time: f64,
}

pub fn build_continuous(p: &QuarterCarParams) -> Result<ContinuousStateSpace> {
    p.validate()?;
    let QuarterCarParams {
        m_s,
        m_u,
        k_s,
        k_r,
        c_s,
    } = *p;
    let sprung = [-k_s / m_s, -c_s / m_s, k_s / m_s, c_s / m_s];
    let unsprung = [k_s / m_u, c_s / m_u, -(k_s + k_r) / m_u, -c_s / m_u];

    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        sprung[0], sprung[1], sprung[2], sprung[3],
        0.0, 0.0, 0.0, 1.0,
        unsprung[0], unsprung[1], unsprung[2], unsprung[3],
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(3, 4, &[
        unsprung[0], unsprung[1], unsprung[2], unsprung[3],
        sprung[0], sprung[1], sprung[2], sprung[3],
        1.0, 0.0, -1.0, 0.0,
    ]);
    Ok(ContinuousStateSpace {
        a,
        b: DVector::from_vec(vec![0.0, 0.0, 0.0, k_r / m_u]),
        c,
        d: DVector::from_vec(vec![k_r / m_u, 0.0, 0.0]),
    })
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a Taylor core.
///
/// The argument is halved until its 1-norm is at most 1/2; the Taylor series
/// is summed until terms stop contributing, then squared back.
pub fn matrix_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix_exp needs a square matrix");
    let norm = norm1(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m / 2f64.powi(squarings);

    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &x / k as f64;
        sum += &term;
        if norm1(&term) <= f64::EPSILON * 1e-3 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretization.
///
/// `A = e^{A_c T}` and `b = Σ_k A_c^k T^{k+1}/(k+1)! · b_c`, both read off the
/// exponential of the augmented matrix `[[A_c, b_c], [0, 0]]·T`, so a singular
/// `A_c` needs no special handling.
pub fn c2d_zoh(ss: &ContinuousStateSpace, sample_time: f64) -> Result<DiscreteStateSpace> {
    if !(sample_time > 0.0) || !sample_time.is_finite() {
        return Err(Error::config(
            "sample_time",
            format!("must be positive, got {sample_time}"),
        ));
    }
    let n = ss.a.nrows();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n))
        .copy_from(&(&ss.a * sample_time));
    aug.view_mut((0, n), (n, 1))
        .copy_from(&(&ss.b * sample_time));
    let e = matrix_exp(&aug);
    Ok(DiscreteStateSpace {
        a: e.view((0, 0), (n, n)).into_owned(),
        b: e.view((0, n), (n, 1)).column(0).into_owned(),
        c: ss.c.clone(),
        d: ss.d.clone(),
        sample_time,
    })
}

/// Discretized quarter car for one parameter set.
pub fn discretize(p: &QuarterCarParams, sample_time: f64) -> Result<DiscreteStateSpace> {
    c2d_zoh(&build_continuous(p)?, sample_time)
}

/// I.i.d. zero-mean Gaussian road displacement, reproducible per seed.
pub fn gen_excitation(samples: usize, variance: f64, seed: u64) -> Result<Vec<f64>> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::config(
            "excitation_variance",
            format!("must be positive, got {variance}"),
        ));
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples).map(|_| normal.sample(&mut rng)).collect())
}

/// Ordered (condition label, duration in samples) segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub segments: Vec<(String, usize)>,
}

impl SwitchSchedule {
    pub fn new(segments: Vec<(String, usize)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("schedule", "needs at least one segment"));
        }
        if let Some((label, _)) = segments.iter().find(|(_, d)| *d == 0) {
            return Err(Error::config(
                "schedule",
                format!("segment `{label}` has zero duration"),
            ));
        }
        Ok(Self { segments })
    }

    pub fn constant(label: impl Into<String>, samples: usize) -> Result<Self> {
        Self::new(vec![(label.into(), samples)])
    }

    pub fn total(&self) -> usize {
        self.segments.iter().map(|(_, d)| d).sum()
    }
}

/// Runs the switching recursion `x(t+1) = A_q x(t) + b_q z_r(t)`,
/// `y(t) = C_q x(t) + d_q z_r(t)`; the state carries over across switches.
///
/// Output channels are unsprung acceleration and sprung acceleration
/// (pseudo-inputs) and relative displacement (target), plus the true label per sample.
pub fn simulate(
    systems: &[(String, DiscreteStateSpace)],
    schedule: &SwitchSchedule,
    z_r: &[f64],
    x0: &DVector<f64>,
) -> Result<TimeSeriesSet> {
    if schedule.total() != z_r.len() {
        return Err(Error::config(
            "schedule",
            format!(
                "durations sum to {} but the input has {} samples",
                schedule.total(),
                z_r.len()
            ),
        ));
    }
    let sample_time = systems
        .first()
        .map(|(_, s)| s.sample_time)
        .ok_or_else(|| Error::config("conditions", "no systems defined"))?;

    let outputs = 3;
    let mut y: Vec<Vec<f64>> = (0..outputs)
        .map(|_| Vec::with_capacity(z_r.len()))
        .collect();
    let mut labels = Vec::with_capacity(z_r.len());
    let mut x = x0.clone();
    let mut t = 0;
    for (label, duration) in &schedule.segments {
        let sys = systems
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::config("schedule", format!("unknown condition `{label}`")))?;
        for _ in 0..*duration {
            let u = z_r[t];
            let out = &sys.c * &x + &sys.d * u;
            for (ch, v) in y.iter_mut().zip(out.iter()) {
                ch.push(*v);
            }
            labels.push(label.clone());
            x = &sys.a * &x + &sys.b * u;
            t += 1;
        }
    }
    let [y1, y2, yo]: [Vec<f64>; 3] = y.try_into().expect("three outputs");
    TimeSeriesSet::new(
        1.0 / sample_time,
        vec![
            Channel::new(UNSPRUNG_ACCEL, ChannelRole::PseudoInput, y1),
            Channel::new(SPRUNG_ACCEL, ChannelRole::PseudoInput, y2),
            Channel::new(RELATIVE_DISPLACEMENT, ChannelRole::TargetOutput, yo),
        ],
    )?
    .with_labels(labels)
}

/// How a signal-to-noise ratio is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    /// No noise added.
    Clean,
    /// Power ratio.
    Linear(f64),
    /// Power ratio in decibels.
    Decibel(f64),
}

impl Snr {
    /// Power ratio; infinite for [`Snr::Clean`].
    pub fn linear(&self) -> f64 {
        match *self {
            Snr::Clean => f64::INFINITY,
            Snr::Linear(r) => r,
            Snr::Decibel(db) => 10f64.powf(db / 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr: Snr,
    pub seed: u64,
}

/// Adds independent white Gaussian noise to every numeric channel, with
/// noise power equal to the channel's mean-square power divided by the SNR.
pub fn add_noise(ts: &TimeSeriesSet, spec: &NoiseSpec) -> Result<TimeSeriesSet> {
    let ratio = spec.snr.linear();
    if ratio.is_infinite() {
        return Ok(ts.clone());
    }
    if !(ratio > 0.0) {
        return Err(Error::config(
            "snr",
            format!("must be positive, got {ratio}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut channels = Vec::with_capacity(ts.channels().len());
    for c in ts.channels() {
        let power = c.data.iter().map(|x| x * x).sum::<f64>() / c.data.len() as f64;
        if power == 0.0 {
            return Err(Error::InvalidData(format!(
                "channel `{}` has zero power; cannot scale noise to an SNR",
                c.name
            )));
        }
        let normal = Normal::new(0.0, (power / ratio).sqrt()).expect("finite std");
        let data = c.data.iter().map(|x| x + normal.sample(&mut rng)).collect();
        channels.push(Channel::new(c.name.clone(), c.role, data));
    }
    let mut out = TimeSeriesSet::new(ts.sample_rate(), channels)?;
    if let Some(labels) = ts.labels() {
        out = out.with_labels(labels.to_vec())?;
    }
    if let Some(cond) = ts.condition() {
        out = out.with_condition(cond);
    }
    Ok(out)
}
