//! Ground-truth data generators: a pendulum integrated with RK4, a heterogeneous 1D
//! wave integrated with leapfrog, and seeded Gaussian noise. Nothing here depends on
//! the discrete-calculus modules.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("integration step {step} exceeds the stability bound {bound}")]
    Unstable { step: f64, bound: f64 },
    #[error("Courant number {courant} exceeds 1 (dt must be <= {max_dt})")]
    Courant { courant: f64, max_dt: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumSpec {
    pub g: f64,
    pub r: f64,
    pub theta0: f64,
    pub omega0: f64,
    /// Sample spacing.
    pub dt: f64,
    /// Duration; `round(t_end / dt) + 1` samples are produced.
    pub t_end: f64,
    /// Explicit RK4 step; defaults to the largest step within the stability bound
    /// that divides `dt`.
    pub step: Option<f64>,
}

impl Default for PendulumSpec {
    fn default() -> Self {
        Self { g: 9.81, r: 1.0, theta0: 1.0, omega0: 0.0, dt: 1e-3, t_end: 10.0, step: None }
    }
}

/// Sampled series on a regular grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleData {
    /// `(name, samples, spacing)` per axis.
    pub axes: Vec<(String, usize, f64)>,
    pub values: Vec<f64>,
    /// Relative drift of the conserved energy over the run.
    pub energy_drift: f64,
}

impl OracleData {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl PendulumSpec {
    pub fn step_bound(&self) -> f64 {
        1e-2 * (self.r / self.g).sqrt()
    }

    fn substeps(&self) -> Result<usize, FixtureError> {
        if !(self.g > 0.0 && self.r > 0.0 && self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(FixtureError::Invalid("pendulum needs g, r, dt > 0 and t_end >= 0".into()));
        }
        let bound = self.step_bound();
        match self.step {
            Some(h) => {
                if h > bound {
                    return Err(FixtureError::Unstable { step: h, bound });
                }
                let k = (self.dt / h).round();
                if k < 1.0 || ((k * h) - self.dt).abs() > 1e-9 * self.dt {
                    return Err(FixtureError::Invalid(format!("step {h} does not divide dt {}", self.dt)));
                }
                Ok(k as usize)
            }
            None => Ok((self.dt / bound).ceil().max(1.0) as usize),
        }
    }

    fn energy(&self, th: f64, om: f64) -> f64 {
        0.5 * om * om - self.g / self.r * th.cos()
    }
}

/// RK4 integration of `theta'' = -(g/r) sin(theta)`, sampled every `dt`.
pub fn simulate_pendulum(spec: &PendulumSpec) -> Result<OracleData, FixtureError> {
    let k = spec.substeps()?;
    let h = spec.dt / k as f64;
    let n = (spec.t_end / spec.dt).round() as usize + 1;
    let a = spec.g / spec.r;
    let f = |th: f64, om: f64| (om, -a * th.sin());
    let (mut th, mut om) = (spec.theta0, spec.omega0);
    let e0 = spec.energy(th, om);
    let mut values = Vec::with_capacity(n);
    let mut drift: f64 = 0.0;
    for i in 0..n {
        values.push(th);
        if i + 1 == n {
            break;
        }
        for _ in 0..k {
            let (k1t, k1o) = f(th, om);
            let (k2t, k2o) = f(th + 0.5 * h * k1t, om + 0.5 * h * k1o);
            let (k3t, k3o) = f(th + 0.5 * h * k2t, om + 0.5 * h * k2o);
            let (k4t, k4o) = f(th + h * k3t, om + h * k3o);
            th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
            om += h / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o);
        }
        drift = drift.max((spec.energy(th, om) - e0).abs());
    }
    let scale = e0.abs().max(a);
    Ok(OracleData { axes: vec![("t".into(), n, spec.dt)], values, energy_drift: drift / scale })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Zero,
    /// `amplitude * sin(mode * pi * x / length)`.
    Sine { mode: u32, amplitude: f64 },
    /// `amplitude * exp(-((x - center) / width)^2)`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    Sum { parts: Vec<Shape> },
}

impl Shape {
    fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Shape::Zero => 0.0,
            Shape::Sine { mode, amplitude } => amplitude * (*mode as f64 * std::f64::consts::PI * x / length).sin(),
            Shape::Gaussian { center, width, amplitude } => amplitude * (-((x - center) / width).powi(2)).exp(),
            Shape::Sum { parts } => parts.iter().map(|p| p.eval(x, length)).sum(),
        }
    }

    fn slope(&self, x: f64, length: f64) -> f64 {
        match self {
            Shape::Zero => 0.0,
            Shape::Sine { mode, amplitude } => {
                let k = *mode as f64 * std::f64::consts::PI / length;
                amplitude * k * (k * x).cos()
            }
            Shape::Gaussian { center, width, amplitude } => {
                let z = (x - center) / width;
                -2.0 * z / width * amplitude * (-z * z).exp()
            }
            Shape::Sum { parts } => parts.iter().map(|p| p.slope(x, length)).sum(),
        }
    }
}

/// Piecewise-constant wave speed: region `k` starts at `from[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedRegion {
    pub from: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialVelocity {
    Zero,
    /// `v0 = -c(x) u0'(x)`: a pulse travelling towards +x.
    RightMoving,
    Shape { shape: Shape },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveSpec {
    /// Spatial samples including both fixed ends.
    pub nx: usize,
    pub dx: f64,
    /// Time samples and sample spacing.
    pub nt: usize,
    pub dt: f64,
    /// Leapfrog steps per sample.
    pub substeps: usize,
    pub speed: Vec<SpeedRegion>,
    pub u0: Shape,
    pub v0: InitialVelocity,
}

impl Default for WaveSpec {
    fn default() -> Self {
        Self {
            nx: 201,
            dx: 0.005,
            nt: 601,
            dt: 0.002,
            substeps: 4,
            speed: vec![SpeedRegion { from: 0.0, c: 1.0 }, SpeedRegion { from: 0.5, c: 2.0 }],
            u0: Shape::Sum {
                parts: vec![
                    Shape::Sine { mode: 1, amplitude: 1.0 },
                    Shape::Sine { mode: 3, amplitude: 0.5 },
                    Shape::Gaussian { center: 0.3, width: 0.05, amplitude: 0.3 },
                ],
            },
            v0: InitialVelocity::Zero,
        }
    }
}

impl WaveSpec {
    pub fn length(&self) -> f64 {
        (self.nx - 1) as f64 * self.dx
    }

    pub fn speed_at(&self, x: f64) -> f64 {
        let mut c = self.speed.first().map(|r| r.c).unwrap_or(1.0);
        for r in &self.speed {
            if x >= r.from {
                c = r.c;
            }
        }
        c
    }

    fn check(&self) -> Result<f64, FixtureError> {
        if self.nx < 3 || self.nt < 2 || !(self.dx > 0.0) || !(self.dt > 0.0) || self.substeps == 0 {
            return Err(FixtureError::Invalid("wave grid needs nx >= 3, nt >= 2, positive spacings and substeps".into()));
        }
        if self.speed.iter().any(|r| !(r.c > 0.0)) {
            return Err(FixtureError::Invalid("wave speeds must be positive".into()));
        }
        let cmax = self.speed.iter().map(|r| r.c).fold(0.0, f64::max);
        let h = self.dt / self.substeps as f64;
        let courant = cmax * h / self.dx;
        if courant > 1.0 {
            return Err(FixtureError::Courant { courant, max_dt: self.dx / cmax * self.substeps as f64 });
        }
        Ok(h)
    }
}

/// Leapfrog integration of `u_tt = (c^2 u_x)_x` with zero ends; `values[j * nx + i]`
/// is `u(x_i, t_j)`.
pub fn simulate_wave1d(spec: &WaveSpec) -> Result<OracleData, FixtureError> {
    let h = spec.check()?;
    let nx = spec.nx;
    let length = spec.length();
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * spec.dx).collect();
    // c^2 at half points i + 1/2
    let c2: Vec<f64> = (0..nx - 1).map(|i| spec.speed_at((i as f64 + 0.5) * spec.dx).powi(2)).collect();
    let lap = |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        for i in 1..nx - 1 {
            out[i] = (c2[i] * (u[i + 1] - u[i]) - c2[i - 1] * (u[i] - u[i - 1])) / (spec.dx * spec.dx);
        }
    };
    let mut u0: Vec<f64> = xs.iter().map(|&x| spec.u0.eval(x, length)).collect();
    u0[0] = 0.0;
    u0[nx - 1] = 0.0;
    let v0: Vec<f64> = match &spec.v0 {
        InitialVelocity::Zero => vec![0.0; nx],
        InitialVelocity::RightMoving => xs.iter().map(|&x| -spec.speed_at(x) * spec.u0.slope(x, length)).collect(),
        InitialVelocity::Shape { shape } => xs.iter().map(|&x| shape.eval(x, length)).collect(),
    };
    let mut acc = vec![0.0; nx];
    lap(&u0, &mut acc);
    let mut prev = u0.clone();
    let mut cur: Vec<f64> = (0..nx).map(|i| u0[i] + h * v0[i] + 0.5 * h * h * acc[i]).collect();
    cur[0] = 0.0;
    cur[nx - 1] = 0.0;

    // staggered discrete energy between levels n and n+1
    let energy = |a: &[f64], b: &[f64]| {
        let kin: f64 = (0..nx).map(|i| ((b[i] - a[i]) / h).powi(2)).sum::<f64>() * 0.5 * spec.dx;
        let pot: f64 = (0..nx - 1).map(|i| c2[i] * (a[i + 1] - a[i]) * (b[i + 1] - b[i])).sum::<f64>() * 0.5 / spec.dx;
        kin + pot
    };
    let e0 = energy(&prev, &cur);
    let mut drift: f64 = 0.0;
    let mut values = Vec::with_capacity(spec.nt * nx);
    values.extend_from_slice(&prev);
    let mut next = vec![0.0; nx];
    for _ in 1..spec.nt {
        for _ in 0..spec.substeps {
            lap(&cur, &mut acc);
            for i in 0..nx {
                next[i] = 2.0 * cur[i] - prev[i] + h * h * acc[i];
            }
            next[0] = 0.0;
            next[nx - 1] = 0.0;
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            drift = drift.max((energy(&prev, &cur) - e0).abs());
        }
        values.extend_from_slice(&prev);
    }
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    Ok(OracleData {
        axes: vec![("t".into(), spec.nt, spec.dt), ("x".into(), nx, spec.dx)],
        values,
        energy_drift: if e0 == 0.0 { drift } else { drift / scale },
    })
}

/// Adds `N(0, (sigma_rel * rms)^2)` noise, reproducible by seed.
pub fn add_noise(data: &[f64], sigma_rel: f64, seed: u64) -> Vec<f64> {
    if sigma_rel <= 0.0 || data.is_empty() {
        return data.to_vec();
    }
    let rms = (data.iter().map(|x| x * x).sum::<f64>() / data.len() as f64).sqrt();
    let sd = sigma_rel * rms;
    if sd == 0.0 {
        return data.to_vec();
    }
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.iter().map(|&x| x + normal.sample(&mut rng)).collect()
}

/// Sidecar record written next to a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub system: String,
    pub spec: serde_json::Value,
    pub seed: u64,
    pub noise: f64,
    pub units: std::collections::BTreeMap<String, String>,
    /// `(name, samples, spacing)` per axis.
    pub axes: Vec<(String, usize, f64)>,
    pub energy_drift: f64,
}

/// Writes `axis..., value` rows with integer indices, last axis fastest.
pub fn write_csv(path: &Path, data: &OracleData, values: &[f64]) -> Result<(), FixtureError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names: Vec<&str> = data.axes.iter().map(|a| a.0.as_str()).collect();
    writeln!(out, "{},value", names.join(","))?;
    let shape: Vec<usize> = data.axes.iter().map(|a| a.1).collect();
    let mut idx = vec![0usize; shape.len()];
    for v in values {
        let cols: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{},{:e}", cols.join(","), v)?;
        for a in (0..shape.len()).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), FixtureError> {
    std::fs::write(path, serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pendulum_at_rest_stays_at_rest() {
        let d = simulate_pendulum(&PendulumSpec { theta0: 0.0, t_end: 1.0, ..Default::default() }).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_angle_period() {
        let spec = PendulumSpec { theta0: 0.01, t_end: 20.0, ..Default::default() };
        let d = simulate_pendulum(&spec).unwrap();
        // downward zero crossings, linearly interpolated
        let mut crossings = Vec::new();
        for i in 1..d.values.len() {
            let (a, b) = (d.values[i - 1], d.values[i]);
            if a > 0.0 && b <= 0.0 {
                crossings.push((i as f64 - 1.0 + a / (a - b)) * spec.dt);
            }
        }
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let want = 2.0 * std::f64::consts::PI * (spec.r / spec.g).sqrt();
        assert!((period - want).abs() / want < 1e-3, "{period} vs {want}");
    }

    #[test]
    fn large_angle_energy_is_conserved() {
        let d = simulate_pendulum(&PendulumSpec::default()).unwrap();
        assert_eq!(d.len(), 10001);
        assert!(d.energy_drift <= 1e-8, "{}", d.energy_drift);
    }

    #[test]
    fn coarse_samples_are_substepped_and_explicit_large_steps_refused() {
        let spec = PendulumSpec { dt: 4e-3, ..Default::default() };
        assert_eq!(spec.substeps().unwrap(), 2);
        let bad = PendulumSpec { step: Some(4e-3), dt: 4e-3, ..Default::default() };
        assert!(matches!(simulate_pendulum(&bad), Err(FixtureError::Unstable { .. })));
    }

    #[test]
    fn zero_wave_stays_zero() {
        let spec = WaveSpec { u0: Shape::Zero, v0: InitialVelocity::Zero, nt: 20, ..Default::default() };
        let d = simulate_wave1d(&spec).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standing_wave_frequency() {
        let spec = WaveSpec {
            nx: 401,
            dx: 0.0025,
            nt: 2001,
            dt: 0.001,
            substeps: 2,
            speed: vec![SpeedRegion { from: 0.0, c: 1.0 }],
            u0: Shape::Sine { mode: 2, amplitude: 1.0 },
            v0: InitialVelocity::Zero,
        };
        let d = simulate_wave1d(&spec).unwrap();
        // probe at x = 1/4 (antinode of mode 2)
        let probe: Vec<f64> = (0..spec.nt).map(|j| d.values[j * spec.nx + 100]).collect();
        let mut crossings = Vec::new();
        for j in 1..probe.len() {
            let (a, b) = (probe[j - 1], probe[j]);
            if a > 0.0 && b <= 0.0 {
                crossings.push((j as f64 - 1.0 + a / (a - b)) * spec.dt);
            }
        }
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let omega = 2.0 * std::f64::consts::PI / period;
        let want = 1.0 * 2.0 * std::f64::consts::PI;
        assert!((omega - want).abs() / want < 5e-3, "{omega} vs {want}");
        assert!(d.energy_drift <= 1e-3);
    }

    #[test]
    fn interface_transmission_coefficient() {
        let (c1, c2) = (1.0, 2.0);
        let spec = WaveSpec {
            nx: 2001,
            dx: 0.001,
            nt: 701,
            dt: 0.001,
            substeps: 4,
            speed: vec![SpeedRegion { from: 0.0, c: c1 }, SpeedRegion { from: 1.0, c: c2 }],
            u0: Shape::Gaussian { center: 0.6, width: 0.03, amplitude: 1.0 },
            v0: InitialVelocity::RightMoving,
        };
        let d = simulate_wave1d(&spec).unwrap();
        // at 0.7 s the reflected pulse is near x = 0.7 and the transmitted one near x = 1.6
        let last = &d.values[(spec.nt - 1) * spec.nx..];
        let peak = |lo: usize, hi: usize| last[lo..hi].iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let transmitted = peak(1100, 2000);
        let reflected = peak(300, 950);
        let t = 2.0 * c1 / (c1 + c2);
        let r = (c1 - c2) / (c1 + c2);
        assert!((transmitted - t).abs() / t < 0.02, "{transmitted} vs {t}");
        assert!((reflected - r).abs() / r.abs() < 0.02, "{reflected} vs {r}");
        assert!(d.energy_drift <= 1e-3);
    }

    #[test]
    fn courant_violation_is_refused() {
        let spec = WaveSpec { substeps: 1, dt: 0.01, ..Default::default() };
        assert!(matches!(simulate_wave1d(&spec), Err(FixtureError::Courant { .. })));
    }

    #[test]
    fn noise_properties() {
        let data: Vec<f64> = (0..20000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(add_noise(&data, 0.0, 1), data);
        let a = add_noise(&data, 0.01, 42);
        assert_eq!(a, add_noise(&data, 0.01, 42));
        let n = data.len() as f64;
        let diffs: Vec<f64> = a.iter().zip(&data).map(|(x, y)| x - y).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.01).abs() / 0.01 < 0.05, "{sd}");
    }
}
