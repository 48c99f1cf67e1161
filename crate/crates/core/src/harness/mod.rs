//! Equivariance measurement and timing.
//!
//! The discrepancy of a map `Φ` over `n` random band-limited inputs `f_i` and
//! Haar-random rotations `R_i` is
//!
//! `Δ = (1/n) Σ_i ‖L_{R_i} Φ(f_i) − Φ(L_{R_i} f_i)‖² / ‖Φ(f_i)‖²`,
//!
//! with maps acting spectrum to spectrum, rotations applied exactly in the
//! spectrum and norms taken by grid quadrature of the synthesized signals.

mod verify;

pub use verify::{run_suite, Check, Suite, VerifyOptions, ORACLE_BANDWIDTH};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{s2_conv_spatial_oracle, s2_conv_spectral, so3_conv_spatial_oracle, so3_conv_spectral, FilterBank};
use crate::error::{Error, Result};
use crate::gft::{
    s2_ifft, so3_ifft, Domain, S2Signal, S2Spectrum, S2Transform, SO3Grid, SO3Signal, SO3Spectrum, So3Transform,
};
use crate::io::Spectrum;
use crate::rotation::{rotate_s2_spectrum, rotate_so3_spectrum};
use crate::Rotation;

/// Largest number of redraws for inputs whose image has zero norm.
const MAX_RESAMPLES: usize = 100;

/// A map between band-limited spectra whose equivariance is measured.
pub trait SpectralMap: Sync {
    fn input_domain(&self) -> Domain;
    fn input_bandwidth(&self) -> usize;
    fn input_channels(&self) -> usize;
    fn apply(&self, input: &Spectrum) -> Result<Spectrum>;
    fn describe(&self) -> String;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub n: usize,
    pub b: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub layer_description: String,
    pub delta: f64,
    pub trials: Vec<f64>,
    /// Inputs redrawn because `‖Φ(f)‖ = 0`.
    pub resampled: usize,
}

/// One stage of a [`Stack`].
#[derive(Clone, Debug)]
pub enum Stage {
    S2Conv(FilterBank),
    So3Conv(FilterBank),
    /// Synthesis, pointwise ReLU on the SO(3) grid, analysis.
    Relu,
}

/// A sequence of convolutions and spatial ReLUs.
pub struct Stack {
    domain: Domain,
    bandwidth: usize,
    channels: usize,
    stages: Vec<Stage>,
    transforms: Vec<(usize, So3Transform)>,
}

impl Stack {
    pub fn new(domain: Domain, bandwidth: usize, channels: usize, stages: Vec<Stage>) -> Result<Self> {
        let mut transforms: Vec<(usize, So3Transform)> = Vec::new();
        let (mut dom, mut b, mut k) = (domain, bandwidth, channels);
        for (i, stage) in stages.iter().enumerate() {
            match stage {
                Stage::S2Conv(f) | Stage::So3Conv(f) => {
                    let expected = if matches!(stage, Stage::S2Conv(_)) {
                        Domain::S2
                    } else {
                        Domain::SO3
                    };
                    if dom != expected || f.domain() != expected || f.in_channels() != k || f.bandwidth() > b {
                        return Err(Error::Config(format!("stage {i} does not fit its input")));
                    }
                    dom = Domain::SO3;
                    b = f.bandwidth();
                    k = f.out_channels();
                }
                Stage::Relu => {
                    if dom != Domain::SO3 {
                        return Err(Error::Config(format!("stage {i}: relu needs an SO(3) feature map")));
                    }
                    if !transforms.iter().any(|(tb, _)| *tb == b) {
                        transforms.push((b, So3Transform::new(b)?));
                    }
                }
            }
        }
        Ok(Stack {
            domain,
            bandwidth,
            channels,
            stages,
            transforms,
        })
    }

    /// `depth` repetitions of SO3Conv `(b, K) → (b, K)` followed by ReLU,
    /// with filters drawn as in network initialization.
    pub fn random_relu_stack(depth: usize, b: usize, k: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = Vec::with_capacity(2 * depth);
        for d in 0..depth {
            let gain = if d == 0 { 1.0 } else { 2.0 };
            stages.push(Stage::So3Conv(random_so3_bank(b, k, k, gain, &mut rng)?));
            stages.push(Stage::Relu);
        }
        Stack::new(Domain::SO3, b, k, stages)
    }

    fn transform(&self, b: usize) -> &So3Transform {
        &self.transforms.iter().find(|(tb, _)| *tb == b).expect("planned").1
    }
}

/// Gaussian real-signal SO(3) filters with coefficient variance
/// `gain / (k_in (2l+1))`.
pub fn random_so3_bank(b: usize, k_in: usize, k_out: usize, gain: f64, rng: &mut ChaCha8Rng) -> Result<FilterBank> {
    let mut spec = SO3Spectrum::random_real(b, k_in * k_out, rng)?;
    // random_real has per-degree variance 1/((2l+1) count); rescale.
    let count = crate::harmonics::so3_coeff_count(b) as f64;
    spec.scale((gain * count / k_in as f64).sqrt());
    FilterBank::from_so3(spec, k_out)
}

impl SpectralMap for Stack {
    fn input_domain(&self) -> Domain {
        self.domain
    }

    fn input_bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn input_channels(&self) -> usize {
        self.channels
    }

    fn apply(&self, input: &Spectrum) -> Result<Spectrum> {
        let mut v = input.clone();
        for stage in &self.stages {
            v = match (stage, v) {
                (Stage::S2Conv(f), Spectrum::S2(s)) => Spectrum::SO3(s2_conv_spectral(&s, f)?),
                (Stage::So3Conv(f), Spectrum::SO3(s)) => Spectrum::SO3(so3_conv_spectral(&s, f)?),
                (Stage::Relu, Spectrum::SO3(s)) => {
                    let t = self.transform(s.bandwidth());
                    let mut sig = t.inverse(&s)?;
                    sig.values_mut().iter_mut().for_each(|x| *x = x.max(0.0));
                    Spectrum::SO3(t.forward(&sig)?)
                }
                _ => return Err(Error::Shape("stage input has the wrong domain".into())),
            };
        }
        Ok(v)
    }

    fn describe(&self) -> String {
        if self.stages.is_empty() {
            return "identity".into();
        }
        self.stages
            .iter()
            .map(|s| match s {
                Stage::S2Conv(f) => format!("s2conv(b{},K{}->{})", f.bandwidth(), f.in_channels(), f.out_channels()),
                Stage::So3Conv(f) => format!("so3conv(b{},K{}->{})", f.bandwidth(), f.in_channels(), f.out_channels()),
                Stage::Relu => "relu".into(),
            })
            .collect::<Vec<_>>()
            .join("-")
    }
}

fn rotate(s: &Spectrum, r: &Rotation) -> Result<Spectrum> {
    Ok(match s {
        Spectrum::S2(x) => Spectrum::S2(rotate_s2_spectrum(x, r)?),
        Spectrum::SO3(x) => Spectrum::SO3(rotate_so3_spectrum(x, r)?),
    })
}

fn difference(a: &Spectrum, c: &Spectrum) -> Result<Spectrum> {
    Ok(match (a, c) {
        (Spectrum::S2(x), Spectrum::S2(y)) => {
            let mut d = x.clone();
            d.axpy(-1.0, y)?;
            Spectrum::S2(d)
        }
        (Spectrum::SO3(x), Spectrum::SO3(y)) => {
            let mut d = x.clone();
            d.axpy(-1.0, y)?;
            Spectrum::SO3(d)
        }
        _ => return Err(Error::Shape("outputs on different domains".into())),
    })
}

/// `‖f‖²` by quadrature of the synthesized signal, summed over channels.
pub fn quadrature_norm_sq(s: &Spectrum) -> Result<f64> {
    Ok(match s {
        Spectrum::S2(x) => s2_ifft(x)?.energy(),
        Spectrum::SO3(x) => {
            let sig = so3_ifft(x)?;
            let grid = SO3Grid::new(x.bandwidth())?;
            (0..sig.channels())
                .map(|c| grid.integrate(&sig.channel(c).iter().map(|v| v * v).collect::<Vec<_>>()))
                .sum()
        }
    })
}

#[derive(Clone, Copy, Debug)]
pub struct DeltaOptions {
    pub n: usize,
    pub seed: u64,
    /// Multiplies every random input.
    pub input_scale: f64,
    /// Use `R_i = identity` instead of Haar-random rotations.
    pub identity_rotations: bool,
}

impl DeltaOptions {
    pub fn new(n: usize, seed: u64) -> Self {
        DeltaOptions {
            n,
            seed,
            input_scale: 1.0,
            identity_rotations: false,
        }
    }
}

fn random_input(map: &dyn SpectralMap, scale: f64, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    let (b, k) = (map.input_bandwidth(), map.input_channels());
    Ok(match map.input_domain() {
        Domain::S2 => {
            let mut s = S2Spectrum::random_real(b, k, rng)?;
            s.scale(scale);
            Spectrum::S2(s)
        }
        Domain::SO3 => {
            let mut s = SO3Spectrum::random_real(b, k, rng)?;
            s.scale(scale);
            Spectrum::SO3(s)
        }
    })
}

fn trial(map: &dyn SpectralMap, i: usize, opts: &DeltaOptions) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(i as u64);
    for attempt in 0..=MAX_RESAMPLES {
        let f = random_input(map, opts.input_scale, &mut rng)?;
        let r = if opts.identity_rotations {
            Rotation::IDENTITY
        } else {
            Rotation::random(&mut rng)
        };
        let out = map.apply(&f)?;
        let denom = quadrature_norm_sq(&out)?;
        if denom <= 0.0 {
            continue;
        }
        let lhs = rotate(&out, &r)?;
        let rhs = map.apply(&rotate(&f, &r)?)?;
        let num = quadrature_norm_sq(&difference(&lhs, &rhs)?)?;
        return Ok((num / denom, attempt));
    }
    Err(Error::Domain(format!("map output vanished for {MAX_RESAMPLES} inputs")))
}

fn report(map: &dyn SpectralMap, description: String, trials: Vec<(f64, usize)>) -> EquivarianceReport {
    let deltas: Vec<f64> = trials.iter().map(|t| t.0).collect();
    EquivarianceReport {
        n: deltas.len(),
        b: map.input_bandwidth(),
        k: map.input_channels(),
        layer_description: description,
        delta: deltas.iter().sum::<f64>() / deltas.len() as f64,
        resampled: trials.iter().map(|t| t.1).sum(),
        trials: deltas,
    }
}

/// Average discrepancy over `n` trials. Trial `i` draws from its own
/// generator stream, so results do not depend on scheduling.
pub fn equivariance_delta_with(map: &dyn SpectralMap, opts: DeltaOptions) -> Result<EquivarianceReport> {
    if opts.n == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let trials: Vec<(f64, usize)> = (0..opts.n)
        .into_par_iter()
        .map(|i| trial(map, i, &opts))
        .collect::<Result<_>>()?;
    Ok(report(map, map.describe(), trials))
}

/// Δ of conv+ReLU stacks of the given depth where every trial also draws
/// fresh filters, so the average runs over networks as well as inputs.
pub fn random_stack_delta(depth: usize, b: usize, k: usize, n: usize, seed: u64) -> Result<EquivarianceReport> {
    if n == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let opts = DeltaOptions::new(n, seed);
    let weights_seed = |i: usize| seed ^ ((depth as u64) << 48) ^ ((i as u64) << 16) ^ 0x5bd1_e995;
    let trials: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| trial(&Stack::random_relu_stack(depth, b, k, weights_seed(i))?, i, &opts))
        .collect::<Result<_>>()?;
    let first = Stack::random_relu_stack(depth, b, k, weights_seed(0))?;
    let description = first.describe();
    Ok(report(&first, description, trials))
}

pub fn equivariance_delta(map: &dyn SpectralMap, n: usize, seed: u64) -> Result<EquivarianceReport> {
    equivariance_delta_with(map, DeltaOptions::new(n, seed))
}

/// Δ for conv+ReLU stacks of depth `0..=l_max` (depth 0 is the identity).
pub fn relu_depth_sweep(l_max: usize, b: usize, k: usize, n: usize, seed: u64) -> Result<Vec<EquivarianceReport>> {
    (0..=l_max)
        .map(|depth| random_stack_delta(depth, b, k, n, seed))
        .collect()
}

/// Δ of a fixed-depth conv+ReLU stack at each bandwidth.
pub fn resolution_sweep(
    depth: usize,
    bandwidths: &[usize],
    k: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<EquivarianceReport>> {
    bandwidths
        .iter()
        .map(|&b| random_stack_delta(depth, b, k, n, seed))
        .collect()
}

/// Least-squares line `y = a + s x`; returns `(s, a, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, c)| (a - mx) * (c - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|c| (c - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Comma-separated table with a header row; `key` labels the first column.
pub fn reports_csv(key: &str, keys: &[usize], reports: &[EquivarianceReport]) -> String {
    let mut out = format!("{key},b,K,n,delta,resampled,layer\n");
    for (k, r) in keys.iter().zip(reports) {
        out.push_str(&format!(
            "{k},{},{},{},{:e},{},{}\n",
            r.b, r.k, r.n, r.delta, r.resampled, r.layer_description
        ));
    }
    out
}

/// One JSON object per line.
pub fn reports_jsonl(reports: &[EquivarianceReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

pub const BENCH_OPS: &[&str] = &[
    "s2_fft",
    "s2_ifft",
    "so3_fft",
    "so3_ifft",
    "s2_conv",
    "so3_conv",
    "s2_conv_oracle",
    "so3_conv_oracle",
    "rotate_s2",
    "rotate_so3",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub op: String,
    pub b: usize,
    pub repetitions: usize,
    pub median_seconds: f64,
}

/// Prepared inputs for one operation at one bandwidth.
enum Prepared {
    S2Fft(S2Transform, S2Signal),
    S2Ifft(S2Transform, S2Spectrum),
    So3Fft(So3Transform, SO3Signal),
    So3Ifft(So3Transform, SO3Spectrum),
    S2Conv(S2Spectrum, FilterBank),
    So3Conv(SO3Spectrum, FilterBank),
    S2Oracle(S2Signal, S2Signal, SO3Grid),
    So3Oracle(SO3Signal, SO3Signal, SO3Grid),
    RotateS2(S2Spectrum, Rotation),
    RotateSo3(SO3Spectrum, Rotation),
}

fn prepare(op: &str, b: usize, seed: u64) -> Result<Prepared> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 2;
    Ok(match op {
        "s2_fft" => Prepared::S2Fft(
            S2Transform::new(b)?,
            s2_ifft(&S2Spectrum::random_real(b, k, &mut rng)?)?,
        ),
        "s2_ifft" => Prepared::S2Ifft(S2Transform::new(b)?, S2Spectrum::random_real(b, k, &mut rng)?),
        "so3_fft" => Prepared::So3Fft(
            So3Transform::new(b)?,
            so3_ifft(&SO3Spectrum::random_real(b, k, &mut rng)?)?,
        ),
        "so3_ifft" => Prepared::So3Ifft(So3Transform::new(b)?, SO3Spectrum::random_real(b, k, &mut rng)?),
        "s2_conv" => Prepared::S2Conv(
            S2Spectrum::random_real(b, k, &mut rng)?,
            FilterBank::random_real(Domain::S2, b, k, k, &mut rng)?,
        ),
        "so3_conv" => Prepared::So3Conv(
            SO3Spectrum::random_real(b, k, &mut rng)?,
            FilterBank::random_real(Domain::SO3, b, k, k, &mut rng)?,
        ),
        "s2_conv_oracle" => Prepared::S2Oracle(
            s2_ifft(&S2Spectrum::random_real(b, 1, &mut rng)?)?,
            s2_ifft(&S2Spectrum::random_real(b, 1, &mut rng)?)?,
            SO3Grid::new(b)?,
        ),
        "so3_conv_oracle" => Prepared::So3Oracle(
            so3_ifft(&SO3Spectrum::random_real(b, 1, &mut rng)?)?,
            so3_ifft(&SO3Spectrum::random_real(b, 1, &mut rng)?)?,
            SO3Grid::new(b)?,
        ),
        "rotate_s2" => Prepared::RotateS2(S2Spectrum::random_real(b, k, &mut rng)?, Rotation::random(&mut rng)),
        "rotate_so3" => Prepared::RotateSo3(SO3Spectrum::random_real(b, k, &mut rng)?, Rotation::random(&mut rng)),
        other => return Err(Error::UnknownOp(other.to_string())),
    })
}

fn execute(p: &Prepared) -> Result<Vec<f64>> {
    let flat = |c: &[num_complex::Complex64]| c.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>();
    Ok(match p {
        Prepared::S2Fft(t, x) => flat(t.forward(x)?.coeffs()),
        Prepared::S2Ifft(t, x) => t.inverse(x)?.into_values(),
        Prepared::So3Fft(t, x) => flat(t.forward(x)?.coeffs()),
        Prepared::So3Ifft(t, x) => t.inverse(x)?.into_values(),
        Prepared::S2Conv(f, p) => flat(s2_conv_spectral(f, p)?.coeffs()),
        Prepared::So3Conv(f, p) => flat(so3_conv_spectral(f, p)?.coeffs()),
        Prepared::S2Oracle(f, p, g) => s2_conv_spatial_oracle(f, p, g)?.into_values(),
        Prepared::So3Oracle(f, p, g) => so3_conv_spatial_oracle(f, p, g)?.into_values(),
        Prepared::RotateS2(f, r) => flat(rotate_s2_spectrum(f, r)?.coeffs()),
        Prepared::RotateSo3(f, r) => flat(rotate_so3_spectrum(f, r)?.coeffs()),
    })
}

/// Runs `op` once at bandwidth `b` on inputs drawn from `seed` and returns
/// its output flattened to reals.
pub fn run_op(op: &str, b: usize, seed: u64) -> Result<Vec<f64>> {
    execute(&prepare(op, b, seed)?)
}

/// Median wall-clock time of `op` per bandwidth; setup is excluded.
pub fn bench(op: &str, bandwidths: &[usize], repetitions: usize) -> Result<Vec<BenchRow>> {
    if !BENCH_OPS.contains(&op) {
        return Err(Error::UnknownOp(op.to_string()));
    }
    let reps = repetitions.max(1);
    bandwidths
        .iter()
        .map(|&b| {
            let p = prepare(op, b, 0)?;
            let mut times: Vec<f64> = (0..reps)
                .map(|_| {
                    let t = Instant::now();
                    execute(&p).map(|out| {
                        std::hint::black_box(out);
                        t.elapsed().as_secs_f64()
                    })
                })
                .collect::<Result<_>>()?;
            times.sort_by(f64::total_cmp);
            let mid = times.len() / 2;
            let median = if times.len() % 2 == 1 {
                times[mid]
            } else {
                (times[mid - 1] + times[mid]) / 2.0
            };
            Ok(BenchRow {
                op: op.to_string(),
                b,
                repetitions: reps,
                median_seconds: median,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("op,b,repetitions,median_seconds\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:e}\n", r.op, r.b, r.repetitions, r.median_seconds));
    }
    out
}

/// A purely spectral single-convolution map on S² or SO(3) inputs.
pub fn single_conv(domain: Domain, b: usize, k: usize, seed: u64) -> Result<Stack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stage = match domain {
        Domain::S2 => Stage::S2Conv(FilterBank::random_real(Domain::S2, b, k, k, &mut rng)?),
        Domain::SO3 => Stage::So3Conv(random_so3_bank(b, k, k, 1.0, &mut rng)?),
    };
    Stack::new(domain, b, k, vec![stage])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rotations_give_zero() {
        let stack = Stack::random_relu_stack(2, 4, 3, 1).unwrap();
        let mut opts = DeltaOptions::new(5, 2);
        opts.identity_rotations = true;
        let r = equivariance_delta_with(&stack, opts).unwrap();
        assert_eq!(r.delta, 0.0);
        let id = Stack::new(Domain::SO3, 4, 3, Vec::new()).unwrap();
        assert!(equivariance_delta(&id, 5, 3).unwrap().delta < 1e-26);
    }

    #[test]
    fn spectral_layers_are_exactly_equivariant() {
        for domain in [Domain::S2, Domain::SO3] {
            let map = single_conv(domain, 6, 3, 4).unwrap();
            let r = equivariance_delta(&map, 10, 5).unwrap();
            assert!(r.delta < 1e-12, "{domain:?}: {}", r.delta);
            assert_eq!(r.trials.len(), 10);
            assert_eq!(r.resampled, 0);
        }
    }

    #[test]
    fn relu_breaks_equivariance_measurably() {
        let stack = Stack::random_relu_stack(1, 6, 3, 6).unwrap();
        let r = equivariance_delta(&stack, 10, 7).unwrap();
        assert!(r.delta > 1e-6 && r.delta < 1.0, "{}", r.delta);
    }

    #[test]
    fn delta_is_scale_invariant() {
        let stack = Stack::random_relu_stack(2, 5, 3, 8).unwrap();
        let base = equivariance_delta(&stack, 6, 9).unwrap();
        let mut opts = DeltaOptions::new(6, 9);
        opts.input_scale = 37.5;
        let scaled = equivariance_delta_with(&stack, opts).unwrap();
        assert!((base.delta - scaled.delta).abs() < 1e-9 * base.delta);
    }

    #[test]
    fn zero_map_outputs_are_resampled_then_rejected() {
        let zero = FilterBank::zeros(Domain::SO3, 3, 2, 2).unwrap();
        let stack = Stack::new(Domain::SO3, 3, 2, vec![Stage::So3Conv(zero)]).unwrap();
        assert!(equivariance_delta(&stack, 2, 1).is_err());
    }

    #[test]
    fn depth_sweep_starts_at_identity() {
        let reports = relu_depth_sweep(2, 4, 2, 4, 10).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].layer_description, "identity");
        assert!(reports[0].delta < 1e-26);
        assert!(reports[1].delta > 1e-8);
        let csv = reports_csv("depth", &[0, 1, 2], &reports);
        assert!(csv.starts_with("depth,b,K,n,delta,resampled,layer\n"));
        assert_eq!(csv.lines().count(), 4);
        let lines = reports_jsonl(&reports);
        let back: EquivarianceReport = serde_json::from_str(lines.lines().nth(1).unwrap()).unwrap();
        assert_eq!(back, reports[1]);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let (s, a, r2) = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert!((s - 2.0).abs() < 1e-12 && (a - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bench_rows_and_purity() {
        assert!(matches!(bench("nope", &[2], 1), Err(Error::UnknownOp(_))));
        for op in BENCH_OPS {
            let b = if op.ends_with("oracle") { 2 } else { 4 };
            assert_eq!(run_op(op, b, 3).unwrap(), run_op(op, b, 3).unwrap());
        }
        let rows = bench("so3_fft", &[2, 4], 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.median_seconds > 0.0));
        assert!(bench_csv(&rows).starts_with("op,b,repetitions,median_seconds\n"));
    }

    #[test]
    fn so3_fft_time_grows_with_bandwidth() {
        let rows = bench("so3_fft", &[2, 4, 8, 16], 3).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[0].median_seconds <= pair[1].median_seconds, "{:?}", rows);
        }
    }

    #[test]
    fn spectral_s2_conv_beats_oracle() {
        let spectral = bench("s2_conv", &[8], 3).unwrap()[0].median_seconds;
        let oracle = bench("s2_conv_oracle", &[8], 1).unwrap()[0].median_seconds;
        assert!(spectral < oracle, "{spectral} vs {oracle}");
    }
}
