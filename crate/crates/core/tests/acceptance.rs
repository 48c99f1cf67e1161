//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;
use sphconv::data::{build_examples, load_mnist_idx, MnistPaths, SphericalDataset};
use sphconv::gft::{s2_ifft, Domain, S2Spectrum};
use sphconv::harness::{
    equivariance_delta, linear_fit, relu_depth_sweep, resolution_sweep, run_suite, single_conv, Check, Suite,
    VerifyOptions,
};
use sphconv::nn::{evaluate, train, Head, Model, ModelConfig, GRADIENT_FLOOR};

const SEED: u64 = 0;

const MNIST_DIR: &str = "../../data/mnist";
const MNIST_TRAIN: usize = 5000;
const MNIST_TEST: usize = 1000;
const MNIST_HEAD: Head = Head::Invariant;
const MNIST_LEARNING_RATE: f64 = 6e-3;
const MNIST_EPOCHS: usize = 20;
const MNIST_SEED: u64 = 7;

/// Outcome of one criterion: verdict, one-line detail, and the bits of
/// every number it computed.
struct Outcome {
    passed: bool,
    detail: String,
    bits: Vec<u64>,
}

fn bits(values: impl IntoIterator<Item = f64>) -> Vec<u64> {
    values.into_iter().map(f64::to_bits).collect()
}

fn checks_outcome(checks: &[Check], elapsed: Duration, limit: Duration) -> Outcome {
    let worst = checks.iter().map(|c| c.value).fold(0.0f64, f64::max);
    let fastest = elapsed < limit;
    Outcome {
        passed: fastest && checks.iter().all(|c| c.passed),
        detail: format!(
            "worst {:.3e} < {:.0e} over {} checks{}; {:.1}s (< {}s)",
            worst,
            checks[0].tolerance,
            checks.len(),
            checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!(", failed {}", c.name))
                .collect::<String>(),
            elapsed.as_secs_f64(),
            limit.as_secs()
        ),
        bits: bits(checks.iter().map(|c| c.value)),
    }
}

fn transform_exactness() -> Outcome {
    let start = Instant::now();
    let mut checks = Vec::new();
    for b in [2, 4, 8, 16] {
        let opts = VerifyOptions {
            bandwidth: b,
            channels: 2,
            trials: 3,
            seed: SEED,
        };
        checks.extend(run_suite(Suite::Roundtrip, &opts).expect("round trip runs"));
    }
    checks_outcome(&checks, start.elapsed(), Duration::from_secs(30))
}

fn convolution_theorems() -> Outcome {
    let start = Instant::now();
    let opts = VerifyOptions {
        bandwidth: 4,
        channels: 2,
        trials: 20,
        seed: SEED,
    };
    let checks = run_suite(Suite::ConvolutionTheorem, &opts).expect("oracles run");
    checks_outcome(&checks, start.elapsed(), Duration::from_secs(120))
}

fn exact_equivariance() -> Outcome {
    let mut deltas = Vec::new();
    for domain in [Domain::SO3, Domain::S2] {
        let layer = single_conv(domain, 10, 10, SEED).expect("layer builds");
        deltas.push(equivariance_delta(&layer, 50, SEED).expect("delta measured").delta);
    }
    Outcome {
        passed: deltas.iter().all(|d| *d < 1e-12),
        detail: format!(
            "so3conv delta {:.3e}, s2conv delta {:.3e} (< 1e-12) at b=10 K=10 n=50",
            deltas[0], deltas[1]
        ),
        bits: bits(deltas),
    }
}

fn relu_shape(n: usize) -> Outcome {
    let start = Instant::now();
    let depth = relu_depth_sweep(10, 10, 10, n, SEED).expect("depth sweep runs");
    let deltas: Vec<f64> = depth[1..].iter().map(|r| r.delta).collect();
    let in_band = deltas.iter().all(|d| (1e-4..=1e-1).contains(d));
    let (d2, d10) = (depth[2].delta, depth[10].delta);
    let ratio = d2.max(d10) / d2.min(d10);

    let bandwidths = [5usize, 10, 15, 20];
    let resolution = resolution_sweep(1, &bandwidths, 10, n, SEED).expect("resolution sweep runs");
    let x: Vec<f64> = bandwidths.iter().map(|&b| b as f64).collect();
    let y: Vec<f64> = resolution.iter().map(|r| r.delta).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    let elapsed = start.elapsed();

    let (lo, hi) = deltas
        .iter()
        .fold((f64::MAX, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    Outcome {
        passed: in_band && ratio < 10.0 && slope > 0.0 && elapsed < Duration::from_secs(600),
        detail: format!(
            "depth 1-10 delta in [{lo:.3e}, {hi:.3e}] (band [1e-4, 1e-1]); depth 2 {d2:.3e} vs 10 {d10:.3e}, ratio \
             {ratio:.2} (< 10); resolution slope {slope:.3e} (> 0, R^2 {r2:.2}); {:.0}s (< 600s)",
            elapsed.as_secs_f64()
        ),
        bits: bits(
            deltas
                .into_iter()
                .chain(y)
                .chain(depth.iter().flat_map(|r| r.trials.clone())),
        ),
    }
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut floored = 0;
    let mut total = 0;
    let mut values = Vec::new();
    for head in [Head::Spatial, Head::Invariant] {
        let model = Model::new(ModelConfig::s2_so3_classifier([4, 3, 2], [3, 4], 10, head, SEED)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
        let f = s2_ifft(&S2Spectrum::random_real(4, 1, &mut rng).unwrap()).unwrap();
        let label = rng.random_range(0..10);
        let ranges = model.param_ranges();
        let picks: Vec<usize> = (0..20)
            .map(|i| rng.random_range(ranges[i % ranges.len()].clone()))
            .collect();
        for c in model
            .gradient_check(&f, label, &picks, 1e-5)
            .expect("gradient check runs")
        {
            worst = worst.max(c.relative_error);
            floored += c.below_floor() as usize;
            total += 1;
            values.extend([c.analytic, c.numeric]);
        }
    }
    Outcome {
        passed: worst < 1e-5,
        detail: format!(
            "worst relative error {worst:.3e} (< 1e-5) over {total} parameters at b=4, {floored} with gradients below \
             {GRADIENT_FLOOR:.0e}"
        ),
        bits: bits(values),
    }
}

struct MnistSets {
    nr_train: SphericalDataset,
    r_train: SphericalDataset,
    nr_test: SphericalDataset,
    r_test: SphericalDataset,
}

fn mnist_sets(train_digits: usize) -> MnistSets {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join(MNIST_DIR);
    let load = |split: &str, take: usize| {
        let paths = MnistPaths::in_dir(&dir, split);
        let mut digits = load_mnist_idx(&paths.images, &paths.labels).expect("MNIST subset present");
        digits.truncate(take);
        digits
    };
    let train_set = load("train", train_digits);
    let test_set = load("t10k", MNIST_TEST);
    MnistSets {
        nr_train: build_examples(&train_set, 10, false, 1).unwrap(),
        r_train: build_examples(&train_set, 10, true, 2).unwrap(),
        nr_test: build_examples(&test_set, 10, false, 3).unwrap(),
        r_test: build_examples(&test_set, 10, true, 4).unwrap(),
    }
}

fn mnist_config(epochs: usize) -> ModelConfig {
    let mut config = ModelConfig::s2_so3_classifier([10, 5, 3], [20, 30], 10, MNIST_HEAD, MNIST_SEED);
    config.train.learning_rate = MNIST_LEARNING_RATE;
    config.train.batch_size = 32;
    config.train.epochs = epochs;
    config
}

/// Accuracies (NR/NR, NR/R, R/R) of the scaled spherical MNIST experiment.
fn mnist_accuracies(sets: &MnistSets, epochs: usize) -> [f64; 3] {
    let config = mnist_config(epochs);
    let nr = train(&config, &sets.nr_train, None, |_| {})
        .expect("training runs")
        .model;
    let r = train(&config, &sets.r_train, None, |_| {})
        .expect("training runs")
        .model;
    [
        evaluate(&nr, &sets.nr_test).unwrap().accuracy,
        evaluate(&nr, &sets.r_test).unwrap().accuracy,
        evaluate(&r, &sets.r_test).unwrap().accuracy,
    ]
}

fn spherical_mnist(sets: &MnistSets) -> (Outcome, [f64; 3]) {
    let start = Instant::now();
    let acc = mnist_accuracies(sets, MNIST_EPOCHS);
    let elapsed = start.elapsed();
    let [nr_nr, nr_r, r_r] = acc;
    let gap = r_r - nr_r;
    let outcome = Outcome {
        passed: nr_nr >= 0.80 && r_r >= 0.75 && nr_r >= 0.60 && gap.abs() <= 0.15 && elapsed.as_secs() <= 7200,
        detail: format!(
            "NR/NR {nr_nr:.3} (>= 0.80), R/R {r_r:.3} (>= 0.75), NR/R {nr_r:.3} (>= 0.60, within 0.15 of R/R: gap \
             {gap:.3}); {MNIST_EPOCHS} epochs, {MNIST_TRAIN} train / {MNIST_TEST} test, {:.0}s (<= 7200s)",
            elapsed.as_secs_f64()
        ),
        bits: bits(acc),
    };
    (outcome, acc)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("pool builds")
        .install(f)
}

/// Criteria 1-5 rerun under pools of 1-5 threads must reproduce the
/// reference bits; the MNIST experiment is rerun at a shortened schedule
/// and compared at the reported precision against the default pool.
fn determinism(reference: &[Vec<u64>], sets: &MnistSets, short_reference: [f64; 3]) -> Outcome {
    let mut mismatches = Vec::new();
    for threads in [1, 2, 3, 4, 5] {
        let runs = in_pool(threads, || {
            [
                transform_exactness().bits,
                convolution_theorems().bits,
                exact_equivariance().bits,
                relu_shape(DETERMINISM_TRIALS).bits,
                gradient_correctness().bits,
            ]
        });
        for (i, (run, want)) in runs.iter().zip(reference).enumerate() {
            if run != want {
                mismatches.push(format!("criterion {} at {threads} threads", i + 1));
            }
        }
    }
    for threads in [2, 4] {
        let acc = in_pool(threads, || mnist_accuracies(sets, DETERMINISM_EPOCHS));
        let same = acc
            .iter()
            .zip(&short_reference)
            .all(|(a, b)| format!("{a:.3}") == format!("{b:.3}"));
        if !same {
            mismatches.push(format!("criterion 6 at {threads} threads"));
        }
    }
    Outcome {
        passed: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            format!(
                "criteria 1-5 bitwise identical at 1-5 threads; MNIST accuracies equal to 3 decimals at 2 and 4 \
                 threads ({DETERMINISM_EPOCHS}-epoch schedule)"
            )
        } else {
            format!("differences: {}", mismatches.join(", "))
        },
        bits: Vec::new(),
    }
}

/// Trials of the depth and resolution sweeps in the determinism reruns.
const DETERMINISM_TRIALS: usize = 10;
const DETERMINISM_EPOCHS: usize = 2;

fn report(number: usize, outcome: &Outcome) -> bool {
    println!(
        "{} criterion {number}: {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.detail
    );
    outcome.passed
}

fn main() {
    // `cargo test -- --list` and filters from other targets must not start
    // the long run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if args
        .iter()
        .any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str()))
    {
        return;
    }

    let mut passed = true;
    let c1 = transform_exactness();
    passed &= report(1, &c1);
    let c2 = convolution_theorems();
    passed &= report(2, &c2);
    let c3 = exact_equivariance();
    passed &= report(3, &c3);
    let c4 = relu_shape(50);
    passed &= report(4, &c4);
    let c5 = gradient_correctness();
    passed &= report(5, &c5);

    let sets = mnist_sets(MNIST_TRAIN);
    let (c6, _) = spherical_mnist(&sets);
    passed &= report(6, &c6);

    let short = mnist_accuracies(&sets, DETERMINISM_EPOCHS);
    let reference = [c1.bits, c2.bits, c3.bits, relu_shape(DETERMINISM_TRIALS).bits, c5.bits];
    passed &= report(7, &determinism(&reference, &sets, short));

    if !passed {
        std::process::exit(1);
    }
}
