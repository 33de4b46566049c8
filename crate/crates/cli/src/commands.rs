use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use bsnn_core::axp::{
    audit_connectivity, compute_axp, explanandum_of, verify_axp_with, AxpOptions, ExplanationRecord, LiteralOrder,
};
use bsnn_core::causal::incompatible_variables;
use bsnn_core::mnist::{Dataset, MnistDir};
use bsnn_core::render::{attribution_image, explanation_image, spike_pgm};
use bsnn_core::shap::{default_delta, relevance_audit, sampled_shapley, AttributionReport, NetworkValue};
use bsnn_core::snn::{classify, simulate, DynamicsTrace, InputSequence, Network, NeuronId, SpikeEncoding};
use bsnn_core::solver::SolverOptions;
use bsnn_core::train::{evaluate, train, EncodingKind, TrainConfig, TrainMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::exit::{failure, ExitKind};
use crate::manifest::{same_output, RunManifest};

/// Name of the training sidecar written next to `network.json`.
pub const TRAINING_FILE: &str = "training.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub metrics: TrainMetrics,
}

/// What a subcommand did, for its manifest.
struct Run {
    stem: String,
    command: Command,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    out_dir: PathBuf,
    /// Reported after the manifest is written.
    outcome: Result<()>,
}

/// Runs `command` and writes its manifest sidecar.
pub fn run(command: Command) -> Result<RunManifest> {
    let start = Instant::now();
    let name = command.name();
    let run = match command {
        Command::Train(a) => cmd_train(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Explain(a) => cmd_explain(a)?,
        Command::Shap(a) => cmd_shap(a)?,
        Command::Verify(a) => cmd_verify(a)?,
        Command::Render(a) => cmd_render(a)?,
        Command::Replay(a) => return cmd_replay(a),
    };
    let manifest = RunManifest {
        subcommand: name.to_string(),
        command: run.command,
        seeds: run.seeds,
        inputs: run.inputs,
        outputs: run.outputs,
        out_dir: run.out_dir.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    manifest.save(&run.out_dir.join(RunManifest::file_name(&run.stem)))?;
    run.outcome.map(|()| manifest)
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn prepare_out_dir(out: &OutArgs) -> Result<PathBuf> {
    fs::create_dir_all(&out.out_dir).with_context(|| format!("creating {}", out.out_dir.display()))?;
    Ok(absolute(&out.out_dir))
}

fn write(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_string());
    Ok(())
}

fn mnist_dir(data: &mut DataArgs) -> Result<MnistDir> {
    let dir = match &data.mnist_dir {
        Some(d) => MnistDir(d.clone()),
        None => MnistDir::locate().ok_or_else(|| {
            failure(ExitKind::Data, "MNIST not found: pass --mnist-dir, set BSNN_MNIST_DIR, or run scripts/fetch-mnist.sh")
        })?,
    };
    let resolved = absolute(&dir.0);
    data.mnist_dir = Some(resolved.clone());
    Ok(MnistDir(resolved))
}

fn load_split(data: &mut DataArgs, split: Split) -> Result<Dataset> {
    let dir = mnist_dir(data)?;
    let set = match split {
        Split::Train => dir.train(),
        Split::Test => dir.test(),
    };
    set.with_context(|| format!("loading the MNIST {split} split from {}", dir.0.display()))
}

fn cmd_train(mut a: TrainArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return Err(failure(ExitKind::Config, "--val-fraction must lie strictly between 0 and 1"));
    }
    let t_end = a.t_end.unwrap_or(match a.encoding {
        EncodingKind::Thresholded => 1,
        EncodingKind::Poisson => 8,
    });
    let mut cfg = TrainConfig::preset(a.encoding, a.k, t_end);
    cfg.digits = a.digits.clone();
    cfg.weight_scale = a.scale;
    cfg.seed = a.seed;
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.hidden_threshold = a.hidden_threshold.unwrap_or(cfg.hidden_threshold);
    cfg.output_threshold = a.output_threshold.unwrap_or(cfg.output_threshold);
    cfg.theta = a.theta.unwrap_or(cfg.theta);
    cfg.train_limit = a.train_limit.unwrap_or(cfg.train_limit);
    cfg.validate()?;
    // record what was actually used
    a.t_end = Some(cfg.t_end);
    a.epochs = Some(cfg.epochs);
    a.lr = Some(cfg.learning_rate);
    a.batch_size = Some(cfg.batch_size);
    a.hidden_threshold = Some(cfg.hidden_threshold);
    a.output_threshold = Some(cfg.output_threshold);
    a.theta = Some(cfg.theta);
    a.train_limit = Some(cfg.train_limit);

    let (tr, val) = load_split(&mut a.data, Split::Train)?.filter_digits(&cfg.digits).split_tail(a.val_fraction);
    let test = load_split(&mut a.data, Split::Test)?.filter_digits(&cfg.digits);
    let outcome = train(&cfg, &tr, &val)?;
    let mut metrics = outcome.metrics;
    let acc = evaluate(&outcome.network, &test, &cfg.spike_encoding(), cfg.seed)?;
    metrics.test_accuracy = Some(acc);
    println!(
        "trained k={} {} {:?} t_end={}: validation {:.4}, test {:.4}",
        cfg.hidden, cfg.weight_scale, cfg.encoding, cfg.t_end, metrics.val_accuracy, acc
    );

    let mut outputs = Vec::new();
    write(&out_dir, "network.json", outcome.network.to_json().as_bytes(), &mut outputs)?;
    let record = TrainingRecord { config: cfg.clone(), metrics };
    write(&out_dir, TRAINING_FILE, serde_json::to_string_pretty(&record)?.as_bytes(), &mut outputs)?;
    let inputs = vec![a.data.mnist_dir.clone().unwrap_or_default()];
    Ok(Run {
        stem: "network".into(),
        seeds: BTreeMap::from([("train".to_string(), cfg.seed)]),
        inputs,
        outputs,
        out_dir,
        command: Command::Train(a),
        outcome: Ok(()),
    })
}

/// A network together with the encoding that feeds it.
struct Model {
    net: Network,
    encoding: SpikeEncoding,
    seed: u64,
}

impl Model {
    fn encode(&self, data: &Dataset, index: usize) -> Result<InputSequence> {
        Ok(self.encoding.encode(&data.images[index], self.seed, index as u64)?)
    }
}

fn load_model(m: &mut ModelArgs) -> Result<Model> {
    m.network = absolute(&m.network);
    let net = Network::load(&m.network).with_context(|| format!("loading network {}", m.network.display()))?;
    if m.encoding.is_none() {
        let sidecar = m.network.with_file_name(TRAINING_FILE);
        let text = fs::read_to_string(&sidecar).map_err(|_| {
            failure(
                ExitKind::Config,
                format!("no --encoding given and no {} beside the network", TRAINING_FILE),
            )
        })?;
        let record: TrainingRecord =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", sidecar.display()))?;
        m.encoding = Some(record.config.encoding);
        m.t_end = m.t_end.or(Some(record.config.t_end));
        m.theta = m.theta.or(Some(record.config.theta));
    }
    let encoding = match m.encoding.expect("resolved above") {
        EncodingKind::Thresholded => {
            if m.t_end.is_some_and(|t| t != 1) {
                return Err(failure(ExitKind::Config, "the thresholded encoding has exactly one time step"));
            }
            m.t_end = Some(1);
            let theta = *m.theta.get_or_insert(SpikeEncoding::DEFAULT_THETA);
            SpikeEncoding::Thresholded { theta }
        }
        EncodingKind::Poisson => {
            let t_end = *m.t_end.get_or_insert(8);
            if t_end == 0 {
                return Err(failure(ExitKind::Config, "--t-end must be at least 1"));
            }
            m.theta = None;
            SpikeEncoding::Poisson { t_end }
        }
    };
    Ok(Model { net, encoding, seed: m.encoding_seed })
}

fn instances(sel: &InstanceArgs, data: &Dataset) -> Result<Vec<usize>> {
    let list: Vec<usize> = match (sel.index, sel.indices) {
        (Some(i), None) => vec![i],
        (None, Some(r)) => (r.start..r.end).collect(),
        _ => return Err(failure(ExitKind::Config, "give exactly one of --index or --indices")),
    };
    if let Some(&bad) = list.iter().find(|&&i| i >= data.len()) {
        return Err(failure(ExitKind::Config, format!("index {bad} outside the {} loaded images", data.len())));
    }
    Ok(list)
}

fn selection_label(sel: &InstanceArgs) -> String {
    match (sel.index, sel.indices) {
        (Some(i), _) => i.to_string(),
        (_, Some(r)) => r.to_string(),
        _ => "none".into(),
    }
}

/// Runs `f` over `items` on a bounded pool, keeping input order.
fn fan_out<T: Send>(jobs: Option<usize>, items: &[usize], f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let threads = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| items.par_iter().map(|&i| f(i)).collect())
}

fn cmd_simulate(mut a: SimulateArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    let model = load_model(&mut a.model)?;
    let data = load_split(&mut a.data, a.instances.split)?;
    let list = instances(&a.instances, &data)?;
    let traces = fan_out(a.instances.jobs, &list, |i| Ok(simulate(&model.net, &model.encode(&data, i)?)?))?;
    let mut outputs = Vec::new();
    for (&i, trace) in list.iter().zip(&traces) {
        let class = classify(trace);
        println!(
            "{i}: label {} predicted {} output spikes {:?}",
            data.labels[i],
            model.net.label_of(class).map_or("?".to_string(), |l| l.to_string()),
            trace.output_counts()
        );
        write(&out_dir, &format!("trace-{i}.json"), trace.to_json().as_bytes(), &mut outputs)?;
    }
    Ok(Run {
        stem: format!("trace-{}", selection_label(&a.instances)),
        seeds: BTreeMap::from([("encoding".to_string(), model.seed)]),
        inputs: vec![a.model.network.clone(), a.data.mnist_dir.clone().unwrap_or_default()],
        outputs,
        out_dir,
        command: Command::Simulate(a),
        outcome: Ok(()),
    })
}

fn cmd_explain(mut a: ExplainArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    let model = load_model(&mut a.model)?;
    let data = load_split(&mut a.data, a.instances.split)?;
    let list = instances(&a.instances, &data)?;
    if a.t > model.encoding.t_end() {
        return Err(failure(ExitKind::Config, format!("--t {} exceeds t_end = {}", a.t, model.encoding.t_end())));
    }
    if !a.raster && a.order_seed.is_none() {
        a.order_seed = Some(0);
    }
    let order = a.order_seed.map_or(LiteralOrder::Raster, LiteralOrder::Seeded);
    let mut opts = AxpOptions::new(a.backend, order);
    opts.solver = SolverOptions { timeout: Duration::from_secs(a.timeout_secs), ..SolverOptions::default() };
    let connected = model.net.connected_inputs();
    let width = data.images.first().map_or(28, |img| img.width);

    let results = fan_out(a.instances.jobs, &list, |i| {
        let input = model.encode(&data, i)?;
        let expl = compute_axp(&model.net, &input, a.t, &opts)
            .with_context(|| format!("explaining instance {i} at t = {} with the {} backend", a.t, a.backend))?;
        let audit = audit_connectivity(&expl.term, &model.net);
        let record = ExplanationRecord::new(&expl, &input, width)?;
        Ok((record, audit))
    })?;

    let mut outputs = Vec::new();
    let mut problems = Vec::new();
    for (&i, (record, audit)) in list.iter().zip(&results) {
        let stem = format!("explain-{i}-t{}", a.t);
        write(&out_dir, &format!("{stem}.json"), serde_json::to_string_pretty(record)?.as_bytes(), &mut outputs)?;
        let image = explanation_image(record, &connected)?;
        write(&out_dir, &format!("{stem}.ppm"), &image.to_ppm(), &mut outputs)?;
        let positive = record.literals.iter().filter(|l| l.polarity).count();
        println!(
            "{i}: {} literals ({positive} positive) in {} checks, {} ms, certificates {}",
            record.literals.len(),
            record.solver_calls,
            record.wall_time_ms,
            if record.certificates.all() { "ok" } else { "FAILED" }
        );
        if !record.certificates.all() {
            problems.push(format!("instance {i}: certificates {:?}", record.certificates));
        }
        if !audit.is_empty() {
            problems.push(format!("instance {i}: disconnected inputs {audit:?} in the explanation"));
        }
    }
    let outcome = if problems.is_empty() { Ok(()) } else { Err(failure(ExitKind::Certificate, problems.join("\n"))) };
    Ok(Run {
        stem: format!("explain-{}-t{}", selection_label(&a.instances), a.t),
        seeds: [("encoding".to_string(), model.seed)]
            .into_iter()
            .chain(a.order_seed.map(|s| ("order".to_string(), s)))
            .collect(),
        inputs: vec![a.model.network.clone(), a.data.mnist_dir.clone().unwrap_or_default()],
        outputs,
        out_dir,
        command: Command::Explain(a),
        outcome,
    })
}

fn cmd_shap(mut a: ShapArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    let model = load_model(&mut a.model)?;
    let data = load_split(&mut a.data, a.instances.split)?;
    let list = instances(&a.instances, &data)?;
    if a.delta.is_some_and(|d| !(d > 0.0)) {
        return Err(failure(ExitKind::Config, "--delta must be positive"));
    }
    let width = data.images.first().map_or(28, |img| img.width);
    let reports = fan_out(a.instances.jobs, &list, |i| {
        let input = model.encode(&data, i)?;
        let class = classify(&simulate(&model.net, &input)?);
        let v = NetworkValue::new(&model.net, &input, class)?;
        let attribution = sampled_shapley(&v, a.sample_size, a.seed)?;
        let delta = a.delta.unwrap_or_else(|| default_delta(&attribution.scores));
        Ok(relevance_audit(&attribution, delta, &model.net)?)
    })?;
    let connected = model.net.connected_inputs();
    let mut outputs = Vec::new();
    for (&i, report) in list.iter().zip(&reports) {
        let stem = format!("shap-{i}");
        write(&out_dir, &format!("{stem}.json"), report.to_json().as_bytes(), &mut outputs)?;
        write(&out_dir, &format!("{stem}.ppm"), &attribution_image(report, &connected, width)?.to_ppm(), &mut outputs)?;
        println!(
            "{i}: {} relevant, {} without a hidden connection ({:.2}%), delta {:.3e}",
            report.relevant.len(),
            report.wrongly_relevant.len(),
            report.wrongly_relevant_pct,
            report.delta
        );
    }
    Ok(Run {
        stem: format!("shap-{}", selection_label(&a.instances)),
        seeds: BTreeMap::from([("encoding".to_string(), model.seed), ("shap".to_string(), a.seed)]),
        inputs: vec![a.model.network.clone(), a.data.mnist_dir.clone().unwrap_or_default()],
        outputs,
        out_dir,
        command: Command::Shap(a),
        outcome: Ok(()),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub items: usize,
    pub failures: Vec<String>,
}

fn is_artifact(name: &str, prefix: &str) -> bool {
    name.starts_with(prefix) && name.ends_with(".json") && !name.ends_with(".manifest.json")
}

fn verify_trace(net: &Network, trace: &DynamicsTrace, name: &str, failures: &mut Vec<String>) -> Result<()> {
    if trace.input.input_count() != net.input_count
        || trace.hidden_count() != net.hidden_count
        || trace.output_count() != net.output_count
    {
        failures.push(format!("{name}: layer sizes do not match the network"));
        return Ok(());
    }
    for v in incompatible_variables(net, trace)? {
        failures.push(format!("{name}: equation of {v} violated ({} at t = {})", v.neuron, v.time));
    }
    let fresh = simulate(net, &trace.input)?;
    let neurons = (0..net.hidden_count).map(NeuronId::hidden).chain((0..net.output_count).map(NeuronId::output));
    for x in neurons {
        for t in 1..=trace.t_end() {
            if fresh.potential(t, x) != trace.potential(t, x) {
                failures.push(format!(
                    "{name}: potential of {x} at t = {t} is {:?}, simulation gives {:?}",
                    trace.potential(t, x),
                    fresh.potential(t, x)
                ));
            }
        }
    }
    Ok(())
}

fn verify_explanation(
    net: &Network,
    record: &ExplanationRecord,
    opts: &SolverOptions,
    name: &str,
    failures: &mut Vec<String>,
) -> Result<()> {
    let input = record.input_sequence()?;
    if input.input_count() != net.input_count {
        failures.push(format!("{name}: input size does not match the network"));
        return Ok(());
    }
    let observed = explanandum_of(&simulate(net, &input)?, record.t)?;
    if observed != record.explanandum {
        failures.push(format!("{name}: recorded output pattern at t = {} differs from the simulation", record.t));
        return Ok(());
    }
    let expl = record.explanation()?;
    let cert = verify_axp_with(&expl, net, &input, opts)?;
    for (ok, what) in [(cert.i, "(i) true in the instance"), (cert.ii, "(ii) entailment"), (cert.iii, "(iii) minimality")] {
        if !ok {
            failures.push(format!("{name}: certificate {what} fails at t = {}", record.t));
        }
    }
    if cert != record.certificates {
        failures.push(format!("{name}: recorded certificates {:?} disagree with {cert:?}", record.certificates));
    }
    for i in audit_connectivity(&expl.term, net) {
        failures.push(format!(
            "{name}: literal on disconnected pixel ({}, {}) at t = {}",
            i % record.width,
            i / record.width,
            record.t
        ));
    }
    Ok(())
}

fn verify_report(net: &Network, report: &AttributionReport, name: &str, failures: &mut Vec<String>) {
    let flagged: Vec<usize> =
        (0..report.scores.len()).filter(|&i| report.scores[i].abs() > report.delta).collect();
    if flagged != report.relevant {
        failures.push(format!("{name}: relevant set does not follow the threshold rule"));
    }
    let connected = net.connected_inputs();
    let wrong: Vec<usize> = report.relevant.iter().copied().filter(|&i| !connected.get(i).copied().unwrap_or(false)).collect();
    if wrong != report.wrongly_relevant {
        failures.push(format!("{name}: disconnected relevant pixels are {wrong:?}, report lists {:?}", report.wrongly_relevant));
    }
}

fn cmd_verify(mut a: VerifyArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    a.network = absolute(&a.network);
    a.dir = absolute(&a.dir);
    let net = Network::load(&a.network).with_context(|| format!("loading network {}", a.network.display()))?;
    let opts = SolverOptions { timeout: Duration::from_secs(a.timeout_secs), ..SolverOptions::default() };
    let mut names: Vec<String> = fs::read_dir(&a.dir)
        .with_context(|| format!("listing {}", a.dir.display()))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .collect();
    names.sort();
    let mut items = 0;
    let mut failures = Vec::new();
    for name in &names {
        let path = a.dir.join(name);
        let read = || fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()));
        if is_artifact(name, "trace-") {
            items += 1;
            match DynamicsTrace::from_json(&read()?) {
                Ok(trace) => verify_trace(&net, &trace, name, &mut failures)?,
                Err(e) => failures.push(format!("{name}: unreadable trace: {e}")),
            }
        } else if is_artifact(name, "explain-") {
            items += 1;
            match serde_json::from_str::<ExplanationRecord>(&read()?) {
                Ok(record) => verify_explanation(&net, &record, &opts, name, &mut failures)?,
                Err(e) => failures.push(format!("{name}: unreadable explanation: {e}")),
            }
        } else if is_artifact(name, "shap-") {
            items += 1;
            match AttributionReport::from_json(&read()?) {
                Ok(report) => verify_report(&net, &report, name, &mut failures),
                Err(e) => failures.push(format!("{name}: unreadable report: {e}")),
            }
        }
    }
    if items == 0 {
        eprintln!("warning: nothing to verify in {}", a.dir.display());
    }
    for f in &failures {
        println!("FAIL {f}");
    }
    println!("verified {items} artifacts, {} failures", failures.len());
    let mut outputs = Vec::new();
    let report = VerifyReport { items, failures };
    write(&out_dir, "verify-report.json", serde_json::to_string_pretty(&report)?.as_bytes(), &mut outputs)?;
    let outcome = if report.failures.is_empty() {
        Ok(())
    } else {
        Err(failure(ExitKind::Certificate, format!("{} checks failed", report.failures.len())))
    };
    Ok(Run {
        stem: "verify".into(),
        seeds: BTreeMap::new(),
        inputs: vec![a.network.clone(), a.dir.clone()],
        outputs,
        out_dir,
        command: Command::Verify(a),
        outcome,
    })
}

fn connectivity(network: &Option<PathBuf>) -> Result<Vec<bool>> {
    let path = network
        .as_ref()
        .ok_or_else(|| failure(ExitKind::Config, "--network is needed for the connectivity mask"))?;
    Ok(Network::load(path).with_context(|| format!("loading network {}", path.display()))?.connected_inputs())
}

fn cmd_render(mut a: RenderArgs) -> Result<Run> {
    let out_dir = prepare_out_dir(&a.out)?;
    a.artifact = absolute(&a.artifact);
    a.network = a.network.as_deref().map(absolute);
    let text = fs::read_to_string(&a.artifact).with_context(|| format!("reading {}", a.artifact.display()))?;
    let stem = a.artifact.file_stem().and_then(|s| s.to_str()).unwrap_or("artifact").to_string();
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| failure(ExitKind::Data, format!("{} is not JSON: {e}", a.artifact.display())))?;
    let mut outputs = Vec::new();
    if value.get("literals").is_some() && value.get("certificates").is_some() {
        let record: ExplanationRecord = serde_json::from_value(value)?;
        let image = explanation_image(&record, &connectivity(&a.network)?)?.scaled(a.zoom);
        write(&out_dir, &format!("{stem}.ppm"), &image.to_ppm(), &mut outputs)?;
    } else if value.get("scores").is_some() && value.get("relevant").is_some() {
        let report: AttributionReport = serde_json::from_value(value)?;
        let image = attribution_image(&report, &connectivity(&a.network)?, a.width)?.scaled(a.zoom);
        write(&out_dir, &format!("{stem}.ppm"), &image.to_ppm(), &mut outputs)?;
    } else if value.is_array() {
        let trace = DynamicsTrace::from_json(&text)
            .map_err(|e| failure(ExitKind::Data, format!("{} is not a trace: {e}", a.artifact.display())))?;
        for t in 1..=trace.t_end() {
            write(&out_dir, &format!("{stem}-t{t}.pgm"), &spike_pgm(&trace.input.row(t), a.width)?, &mut outputs)?;
        }
    } else {
        return Err(failure(ExitKind::Data, format!("unknown artifact type in {}", a.artifact.display())));
    }
    let mut inputs = vec![a.artifact.clone()];
    inputs.extend(a.network.clone());
    Ok(Run {
        stem: format!("{stem}.render"),
        seeds: BTreeMap::new(),
        inputs,
        outputs,
        out_dir,
        command: Command::Render(a),
        outcome: Ok(()),
    })
}

fn with_out_dir(command: &Command, dir: &Path) -> Result<Command> {
    let mut c = command.clone();
    let out = match &mut c {
        Command::Train(a) => &mut a.out,
        Command::Simulate(a) => &mut a.out,
        Command::Explain(a) => &mut a.out,
        Command::Shap(a) => &mut a.out,
        Command::Verify(a) => &mut a.out,
        Command::Render(a) => &mut a.out,
        Command::Replay(_) => return Err(failure(ExitKind::Config, "a replay manifest cannot be replayed")),
    };
    out.out_dir = dir.to_path_buf();
    Ok(c)
}

fn cmd_replay(a: ReplayArgs) -> Result<RunManifest> {
    let recorded = RunManifest::load(&a.manifest)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    if absolute(&a.out_dir) == absolute(&recorded.out_dir) {
        return Err(failure(ExitKind::Config, "--out-dir must differ from the recorded output directory"));
    }
    let fresh = run(with_out_dir(&recorded.command, &a.out_dir)?)?;
    let mut differing = Vec::new();
    for name in &recorded.outputs {
        if !same_output(&recorded.out_dir.join(name), &fresh.out_dir.join(name))? {
            differing.push(name.clone());
        }
    }
    if !differing.is_empty() {
        return Err(failure(ExitKind::Other, format!("replay differs in {}", differing.join(", "))));
    }
    println!("replay reproduced {} outputs", recorded.outputs.len());
    Ok(fresh)
}
