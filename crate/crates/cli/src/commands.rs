use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use sphconv::conv::{s2_conv_spectral, so3_conv_spectral, FilterBank};
use sphconv::data::{build_dataset, MnistPaths, SphericalDataset};
use sphconv::gft::{s2_fft, s2_ifft, so3_fft, so3_ifft, Domain, S2Spectrum, SO3Spectrum};
use sphconv::harness::{
    bench, bench_csv, equivariance_delta, linear_fit, relu_depth_sweep, reports_csv, reports_jsonl, resolution_sweep,
    run_suite, single_conv, BenchRow, Suite, VerifyOptions, BENCH_OPS,
};
use sphconv::io::{
    load_signal, load_spectrum, save_signal, save_spectrum, Signal, Spectrum, SIGNAL_MAGIC, SPECTRUM_MAGIC,
};
use sphconv::nn::{evaluate, train, Checkpoint, Head, MetricRecord, ModelConfig, TrainConfig, TrainingMeta};

use crate::args::*;
use crate::{report, Failure, Outcome};

#[derive(Serialize)]
struct Echo<'a> {
    #[serde(flatten)]
    command: &'a Command,
    threads: usize,
}

pub fn run(cli: Cli) -> Outcome {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let echo = Echo {
        command: &cli.command,
        threads: rayon::current_num_threads(),
    };
    println!("{}", json(&echo));
    match &cli.command {
        Command::Transform(a) => transform(a),
        Command::Conv(a) => conv(a),
        Command::Verify(a) => verify(a),
        Command::Equivariance(a) => equivariance(a),
        Command::MakeDataset(a) => make_dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn input(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Io(format!("{}: no such file", path.display())))
    }
}

fn output(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Failure::Io(format!("{}: directory does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn magic(path: &Path) -> Result<[u8; 4], Failure> {
    let mut m = [0u8; 4];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut m))
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(m)
}

enum Loaded {
    Signal(Signal),
    Spectrum(Spectrum),
}

fn load_any(path: &Path) -> Result<Loaded, Failure> {
    match magic(path)? {
        SIGNAL_MAGIC => Ok(Loaded::Signal(load_signal(path)?)),
        SPECTRUM_MAGIC => Ok(Loaded::Spectrum(load_spectrum(path)?)),
        m => Err(Failure::Io(format!(
            "{}: not a signal or spectrum file (magic {:?})",
            path.display(),
            String::from_utf8_lossy(&m)
        ))),
    }
}

fn to_spectrum(s: &Signal) -> Result<Spectrum, Failure> {
    Ok(match s {
        Signal::S2(x) => Spectrum::S2(s2_fft(x)?),
        Signal::SO3(x) => Spectrum::SO3(so3_fft(x)?),
    })
}

fn to_signal(s: &Spectrum) -> Result<Signal, Failure> {
    Ok(match s {
        Spectrum::S2(x) => Signal::S2(s2_ifft(x)?),
        Spectrum::SO3(x) => Signal::SO3(so3_ifft(x)?),
    })
}

fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::S2 => "s2",
        Domain::SO3 => "so3",
    }
}

#[derive(Serialize)]
struct FileSummary {
    written: PathBuf,
    kind: &'static str,
    domain: &'static str,
    b: usize,
    channels: usize,
}

fn transform(a: &TransformArgs) -> Outcome {
    output(&a.output)?;
    let summary = |kind, domain, b, channels| FileSummary {
        written: a.output.clone(),
        kind,
        domain: domain_name(domain),
        b,
        channels,
    };
    let done = if a.generate {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let spectrum = match a.domain {
            DomainArg::S2 => Spectrum::S2(S2Spectrum::random_real(a.b, a.channels, &mut rng)?),
            DomainArg::So3 => Spectrum::SO3(SO3Spectrum::random_real(a.b, a.channels, &mut rng)?),
        };
        let signal = to_signal(&spectrum)?;
        save_signal(&a.output, &signal)?;
        summary("signal", signal.domain(), signal.bandwidth(), signal.channels())
    } else {
        let path = a.input.as_ref().expect("required unless generating");
        input(path)?;
        match load_any(path)? {
            Loaded::Signal(s) => {
                let spectrum = to_spectrum(&s)?;
                save_spectrum(&a.output, &spectrum)?;
                summary("spectrum", spectrum.domain(), spectrum.bandwidth(), spectrum.channels())
            }
            Loaded::Spectrum(s) => {
                let signal = to_signal(&s)?;
                save_signal(&a.output, &signal)?;
                summary("signal", signal.domain(), signal.bandwidth(), signal.channels())
            }
        }
    };
    println!("{}", json(&done));
    Ok(())
}

fn conv(a: &ConvArgs) -> Outcome {
    input(&a.input)?;
    if let Some(f) = &a.filters {
        input(f)?;
    }
    output(&a.output)?;
    let spectrum = match load_any(&a.input)? {
        Loaded::Signal(s) => to_spectrum(&s)?,
        Loaded::Spectrum(s) => s,
    };
    let (domain, k_in) = (spectrum.domain(), spectrum.channels());
    let bank = match &a.filters {
        Some(path) => {
            let filters = load_spectrum(path)?;
            if filters.domain() != domain {
                return Err(Failure::Usage("filters and input live on different domains".into()));
            }
            if filters.channels() != k_in * a.out_channels {
                return Err(Failure::Usage(format!(
                    "filter file has {} channels, expected {k_in} x {}",
                    filters.channels(),
                    a.out_channels
                )));
            }
            match filters {
                Spectrum::S2(f) => FilterBank::from_s2(f, a.out_channels)?,
                Spectrum::SO3(f) => FilterBank::from_so3(f, a.out_channels)?,
            }
        }
        None => {
            let b = a.filter_b.unwrap_or(spectrum.bandwidth());
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            FilterBank::random_real(domain, b, k_in, a.out_channels, &mut rng)?
        }
    };
    let out = match &spectrum {
        Spectrum::S2(f) => s2_conv_spectral(f, &bank)?,
        Spectrum::SO3(f) => so3_conv_spectral(f, &bank)?,
    };
    let (b, k) = (out.bandwidth(), out.channels());
    let kind = if a.as_signal {
        save_signal(&a.output, &Signal::SO3(so3_ifft(&out)?))?;
        "signal"
    } else {
        save_spectrum(&a.output, &Spectrum::SO3(out))?;
        "spectrum"
    };
    println!(
        "{}",
        json(&FileSummary {
            written: a.output.clone(),
            kind,
            domain: "so3",
            b,
            channels: k,
        })
    );
    Ok(())
}

fn verify(a: &VerifyArgs) -> Outcome {
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::All => Suite::ALL.to_vec(),
        SuiteArg::Roundtrip => vec![Suite::Roundtrip],
        SuiteArg::Orthogonality => vec![Suite::Orthogonality],
        SuiteArg::ConvolutionTheorem => vec![Suite::ConvolutionTheorem],
        SuiteArg::Equivariance => vec![Suite::Equivariance],
        SuiteArg::Gradient => vec![Suite::Gradient],
    };
    let opts = VerifyOptions {
        bandwidth: a.b,
        channels: a.channels,
        trials: a.trials,
        seed: a.seed,
    };
    let mut failed = 0;
    let mut total = 0;
    for suite in suites {
        for check in run_suite(suite, &opts)? {
            println!("{check}");
            total += 1;
            failed += !check.passed as usize;
        }
    }
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {total} checks failed")));
    }
    println!("all {total} checks passed");
    Ok(())
}

fn write_table(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn equivariance(a: &EquivarianceArgs) -> Outcome {
    if let Some(p) = &a.output {
        output(p)?;
    }
    let (keys, reports, key) = match a.sweep {
        Sweep::Single => {
            let domain = match a.domain {
                DomainArg::S2 => Domain::S2,
                DomainArg::So3 => Domain::SO3,
            };
            let map = single_conv(domain, a.b, a.k, a.seed)?;
            (vec![1], vec![equivariance_delta(&map, a.n, a.seed)?], "layers")
        }
        Sweep::Depth => (
            (0..=a.l_max).collect(),
            relu_depth_sweep(a.l_max, a.b, a.k, a.n, a.seed)?,
            "depth",
        ),
        Sweep::Resolution => (
            vec![a.depth; a.bandwidths.0.len()],
            resolution_sweep(a.depth, &a.bandwidths.0, a.k, a.n, a.seed)?,
            "depth",
        ),
    };
    let text = match a.format {
        Format::Csv => reports_csv(key, &keys, &reports),
        Format::Jsonl => reports_jsonl(&reports),
    };
    write_table(a.output.as_deref(), &text)?;
    if a.sweep == Sweep::Resolution && reports.len() >= 2 {
        let x: Vec<f64> = reports.iter().map(|r| r.b as f64).collect();
        let y: Vec<f64> = reports.iter().map(|r| r.delta).collect();
        let (slope, intercept, r2) = linear_fit(&x, &y);
        #[derive(Serialize)]
        struct Fit {
            slope: f64,
            intercept: f64,
            r2: f64,
        }
        println!("{}", json(&Fit { slope, intercept, r2 }));
    }
    Ok(())
}

fn sha256_hex(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn make_dataset(a: &MakeDatasetArgs) -> Outcome {
    let prefix = match a.split {
        Split::Train => "train",
        Split::T10k => "t10k",
    };
    let paths = MnistPaths::in_dir(&a.mnist_dir, prefix);
    input(&paths.images)?;
    input(&paths.labels)?;
    output(&a.output)?;
    let data = build_dataset(&paths, a.b, a.rotate, a.seed, a.limit, &a.output)?;
    #[derive(Serialize)]
    struct Made {
        written: PathBuf,
        examples: usize,
        label_counts: [usize; 10],
        sha256: String,
    }
    println!(
        "{}",
        json(&Made {
            written: a.output.clone(),
            examples: data.len(),
            label_counts: data.label_counts(),
            sha256: sha256_hex(&a.output)?,
        })
    );
    Ok(())
}

fn metrics_sink(path: Option<&Path>, append: bool) -> Result<Option<BufWriter<File>>, Failure> {
    path.map(|p| {
        OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(p)
            .map(BufWriter::new)
            .map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn emit(sink: &mut Option<BufWriter<File>>, record: &MetricRecord) -> io::Result<()> {
    if let Some(w) = sink {
        writeln!(w, "{}", json(record))?;
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Outcome {
    input(&a.train)?;
    if let Some(p) = &a.eval {
        input(p)?;
    }
    output(&a.output)?;
    if let Some(p) = &a.metrics {
        output(p)?;
    }
    let (b, k) = (&a.bandwidths.0, &a.channels.0);
    if b.len() != 3 || k.len() != 2 {
        return Err(Failure::Usage("--bandwidths takes 3 values and --channels 2".into()));
    }
    let head = match a.head {
        HeadArg::Spatial => Head::Spatial,
        HeadArg::Invariant => Head::Invariant,
    };
    let mut config = ModelConfig::s2_so3_classifier([b[0], b[1], b[2]], [k[0], k[1]], a.classes, head, a.seed);
    config.train = TrainConfig {
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        ..TrainConfig::default()
    };
    if a.batch_size == 0 {
        return Err(Failure::Usage("--batch-size must be positive".into()));
    }
    config.validate()?;
    let data = SphericalDataset::load(&a.train)?;
    let eval_data = a.eval.as_ref().map(SphericalDataset::load).transpose()?;
    let mut sink = metrics_sink(a.metrics.as_deref(), false)?;
    let mut write_err = None;
    let outcome = train(&config, &data, eval_data.as_ref(), |stats| {
        let record = stats.record();
        println!("{}", json(&record));
        if let Err(e) = emit(&mut sink, &record) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    if let Some(w) = sink.as_mut() {
        w.flush()?;
    }
    let meta = TrainingMeta {
        epochs: outcome.history.len(),
        loss_history: outcome.history.iter().map(|s| s.train_loss).collect(),
    };
    Checkpoint::new(outcome.model, meta).save(&a.output)?;
    Ok(())
}

fn eval(a: &EvalArgs) -> Outcome {
    input(&a.checkpoint)?;
    input(&a.data)?;
    if let Some(p) = &a.metrics {
        output(p)?;
    }
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let data = SphericalDataset::load(&a.data)?;
    let result = evaluate(&checkpoint.model, &data)?;
    let records = result.records(&a.regime);
    let mut sink = metrics_sink(a.metrics.as_deref(), true)?;
    for r in &records {
        emit(&mut sink, r)?;
    }
    if let Some(w) = sink.as_mut() {
        w.flush()?;
    }
    println!("{}", json(records.last().expect("summary record")));
    if let Some(min) = a.min_accuracy {
        if result.accuracy < min {
            return Err(Failure::Verification(format!(
                "accuracy {:.4} below required {min}",
                result.accuracy
            )));
        }
    }
    Ok(())
}

fn bench_cmd(a: &BenchArgs) -> Outcome {
    if let Some(p) = &a.output {
        output(p)?;
    }
    let ops: Vec<&str> = if a.op == "all" {
        BENCH_OPS.to_vec()
    } else {
        vec![a.op.as_str()]
    };
    let mut rows: Vec<BenchRow> = Vec::new();
    for op in ops {
        rows.extend(bench(op, &a.bandwidths.0, a.reps)?);
    }
    let text = match a.format {
        Format::Csv => bench_csv(&rows),
        Format::Jsonl => rows.iter().map(|r| json(r) + "\n").collect(),
    };
    write_table(a.output.as_deref(), &text)
}

fn report_cmd(a: &ReportArgs) -> Outcome {
    let mut streams = Vec::new();
    for path in &a.inputs {
        let (name, text) = if path.as_os_str() == "-" {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text)?;
            ("<stdin>".to_string(), text)
        } else {
            input(path)?;
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            (path.display().to_string(), text)
        };
        let records = report::parse(&name, &text)?;
        streams.push((name, records));
    }
    print!("{}", report::render(&streams)?);
    Ok(())
}
