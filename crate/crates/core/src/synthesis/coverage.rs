use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::interferometry::UvCoverage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayStyle {
    /// Stations spread around a circle: few, long, sparse baselines.
    EhtLike,
    /// Stations along an elongated ellipse.
    VlbaLike,
}

impl ArrayStyle {
    pub fn name(&self) -> &'static str {
        match self {
            ArrayStyle::EhtLike => "eht_like",
            ArrayStyle::VlbaLike => "vlba_like",
        }
    }

    pub fn default_stations(&self) -> usize {
        match self {
            ArrayStyle::EhtLike => 8,
            ArrayStyle::VlbaLike => 10,
        }
    }
}

impl fmt::Display for ArrayStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArrayStyle {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eht_like" => Ok(ArrayStyle::EhtLike),
            "vlba_like" => Ok(ArrayStyle::VlbaLike),
            _ => Err(CoreError::invalid("array style", format!("unknown style {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    pub style: ArrayStyle,
    pub n_stations: usize,
    pub n_time_steps: usize,
    /// Source declination in radians; sets the arc ellipticity.
    pub declination: f64,
    /// Total hour-angle span of the observation in radians.
    pub hour_angle_span: f64,
    pub target_points: usize,
    /// Image side the coverage is scaled for; the longest projected baseline
    /// lands at 0.9 of the Nyquist limit.
    pub grid_size: usize,
    pub rng_seed: u64,
}

impl ArrayConfig {
    pub fn eht_like(grid_size: usize) -> Self {
        Self {
            style: ArrayStyle::EhtLike,
            n_stations: 8,
            n_time_steps: 40,
            declination: PI / 4.0,
            hour_angle_span: PI * 2.0 / 3.0,
            target_points: 1660,
            grid_size,
            rng_seed: 0,
        }
    }

    pub fn vlba_like(grid_size: usize) -> Self {
        Self {
            style: ArrayStyle::VlbaLike,
            n_stations: 10,
            n_time_steps: 30,
            declination: PI / 4.0,
            hour_angle_span: PI * 2.0 / 3.0,
            target_points: 2298,
            grid_size,
            rng_seed: 0,
        }
    }

    pub fn for_style(style: ArrayStyle, grid_size: usize) -> Self {
        match style {
            ArrayStyle::EhtLike => Self::eht_like(grid_size),
            ArrayStyle::VlbaLike => Self::vlba_like(grid_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stations < 2 {
            return Err(CoreError::invalid("n_stations", format!("{} < 2", self.n_stations)));
        }
        if self.n_time_steps == 0 {
            return Err(CoreError::invalid("n_time_steps", "must be >= 1"));
        }
        if self.target_points == 0 {
            return Err(CoreError::invalid("target_points", "must be >= 1"));
        }
        if self.grid_size < 2 {
            return Err(CoreError::invalid("grid_size", format!("{} < 2", self.grid_size)));
        }
        if !(self.declination.is_finite() && self.declination.sin().abs() > 1e-3) {
            return Err(CoreError::invalid("declination", format!("{} collapses the arcs onto a line", self.declination)));
        }
        if !(self.hour_angle_span >= 0.0 && self.hour_angle_span.is_finite()) {
            return Err(CoreError::invalid("hour_angle_span", format!("{}", self.hour_angle_span)));
        }
        Ok(())
    }
}

fn station_positions<R: Rng>(cfg: &ArrayConfig, rng: &mut R) -> Vec<(f64, f64)> {
    let n = cfg.n_stations;
    (0..n)
        .map(|k| {
            let jitter = rng.gen_range(-0.5..0.5);
            let theta = 2.0 * PI * (k as f64 + jitter) / n as f64;
            match cfg.style {
                ArrayStyle::EhtLike => (theta.cos(), theta.sin()),
                ArrayStyle::VlbaLike => {
                    let r = rng.gen_range(0.3..1.0);
                    (r * theta.cos(), 0.35 * r * theta.sin())
                }
            }
        })
        .collect()
}

/// Earth-rotation synthesis: every baseline traces an elliptical arc over the
/// hour-angle span. Points come in `(u, v)`, `(-u, -v)` pairs; pairs are
/// subsampled, or duplicated, to hit `target_points` exactly.
pub fn generate_coverage<R: Rng>(cfg: &ArrayConfig, rng: &mut R) -> Result<UvCoverage> {
    cfg.validate()?;
    let stations = station_positions(cfg, rng);
    let sin_dec = cfg.declination.sin();
    let t = cfg.n_time_steps;
    let mut half_pairs = Vec::new();
    for i in 0..stations.len() {
        for j in i + 1..stations.len() {
            let lx = stations[j].0 - stations[i].0;
            let ly = stations[j].1 - stations[i].1;
            for s in 0..t {
                let frac = if t == 1 { 0.5 } else { s as f64 / (t - 1) as f64 };
                let h = (frac - 0.5) * cfg.hour_angle_span;
                let u = lx * h.sin() + ly * h.cos();
                let v = sin_dec * (-lx * h.cos() + ly * h.sin());
                half_pairs.push((u, v));
            }
        }
    }

    let extent = half_pairs.iter().fold(0.0f64, |m, &(u, v)| m.max(u.abs()).max(v.abs()));
    if !(extent > 0.0) {
        return Err(CoreError::invalid("array layout", "all baselines have zero projected length"));
    }
    let scale = 0.9 * (cfg.grid_size as f64 / 2.0) / extent;

    let want_pairs = cfg.target_points.div_ceil(2);
    let chosen: Vec<usize> = if want_pairs <= half_pairs.len() {
        let mut idx = index::sample(rng, half_pairs.len(), want_pairs).into_vec();
        idx.sort_unstable();
        idx
    } else {
        let mut idx: Vec<usize> = (0..half_pairs.len()).collect();
        while idx.len() < want_pairs {
            idx.push(rng.gen_range(0..half_pairs.len()));
        }
        idx
    };

    let mut points = Vec::with_capacity(2 * chosen.len());
    for i in chosen {
        let (u, v) = half_pairs[i];
        points.push((u * scale, v * scale));
        points.push((-u * scale, -v * scale));
    }
    points.truncate(cfg.target_points);
    let cov = UvCoverage::new(points)?;
    cov.check_nyquist(cfg.grid_size, cfg.grid_size)?;
    Ok(cov)
}
