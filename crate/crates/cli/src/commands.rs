use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use scour_core::experiment::{load_frame, run_feature_sweep, run_training, run_tune, DataSource, ExperimentConfig};
use scour_core::features::{equivalent_velocity, time_features, DepthConvention};
use scour_core::frame_io::{read_frame_csv, write_frame_csv, write_sensor_csv};
use scour_core::ingest::{preprocess as run_preprocess, PreprocessParams};
use scour_core::models::{build, checkpoint_file_name, parse_config, BindShape, Checkpoint};
use scour_core::neural::{gradient_check, Tensor};
use scour_core::search::forecast_bundle;
use scour_core::synth::{generate, ScenarioSpec};
use scour_core::timeseries::{make_windows_in, ChannelId, TimeSeriesFrame, Timestamp, WindowSpec};
use serde::Serialize;

use crate::output::{write_atomic, write_json, RunDir};
use crate::{Failure, ForecastArgs, GradcheckArgs, Kind, PreprocessArgs, RunArgs, SynthArgs};

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!("config file {} not found", path.display())));
    }
    ExperimentConfig::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn dataset_id(cfg: &ExperimentConfig) -> String {
    match &cfg.data {
        DataSource::Csv { path } => {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into())
        }
        DataSource::Synth(spec) => format!("synth-{:?}-{}", spec.kind, spec.seed).to_lowercase(),
    }
}

pub fn preprocess(a: &PreprocessArgs) -> Result<(), Failure> {
    let bytes = read_bytes(&a.input)?;
    let params = PreprocessParams { despike_window: a.despike_window, k_mad: a.k_mad, max_gap: a.max_gap };
    let (frame, report) = run_preprocess(&bytes, &params)?;
    let dir = RunDir::create(a.out.clone(), "preprocess")?;
    write_atomic(&dir.file("frame.csv"), write_frame_csv(&frame).as_bytes())?;
    write_json(&dir.file("report.json"), &report)?;
    println!(
        "{} readings ({} malformed) -> {} hours, {} spikes masked, {} gaps filled",
        report.parsed, report.malformed, report.hours, report.masked_spikes, report.filled_gaps
    );
    dir.finish()
}

pub fn synth(a: &SynthArgs) -> Result<(), Failure> {
    let spec = match a.kind {
        Kind::Seasonal => ScenarioSpec::seasonal(a.years, a.noise_std, a.floods, a.rho, a.seed),
        Kind::Tidal => ScenarioSpec::tidal(a.years, a.noise_std, a.floods, a.rho, a.seed),
    };
    let frame = generate(&spec)?;
    let dir = RunDir::create(a.out.clone(), "synth")?;
    write_atomic(&dir.file("frame.csv"), write_frame_csv(&frame).as_bytes())?;
    write_atomic(&dir.file("sensor.csv"), write_sensor_csv(&frame).as_bytes())?;
    write_json(&dir.file("scenario.json"), &spec)?;
    dir.write_seed(spec.seed)?;
    println!("{} hours of {:?} data written to {}", frame.len(), spec.kind, dir.path.display());
    dir.finish()
}

pub fn train(a: &RunArgs, sequential: bool) -> Result<(), Failure> {
    let mut cfg = load_config(&a.config)?;
    if sequential {
        cfg.folds = cfg.folds.or(Some(3));
    } else if cfg.folds.is_some() {
        return Err(Failure::usage("the config sets `folds`; use `scour sequential`"));
    }
    let dir = RunDir::for_config(a.out.as_deref(), &cfg, if sequential { "sequential" } else { "train" })?;
    cfg.output_dir = Some(dir.path.clone());
    cfg.validate()?;
    dir.write_config(&cfg)?;
    let frame = load_frame(&cfg)?;
    let run = run_training(&cfg, &frame)?;
    let id = dataset_id(&cfg);
    for (fold, ck) in run.bests.iter().enumerate() {
        let json = ck.to_json()?;
        write_atomic(&dir.file("checkpoints").join(checkpoint_file_name(&ck.config, &id, fold)), json.as_bytes())?;
    }
    write_json(&dir.file("report.json"), &run.report)?;
    for f in &run.report.folds {
        let r = &f.report;
        let show = |m: Option<scour_core::training::Mae>| {
            m.map_or("-".to_string(), |m| format!("{:.4} ft / {:.4} m", m.ft, m.m))
        };
        println!(
            "fold {}: {} epochs, val {}, test {}, final test {}",
            f.fold,
            r.epochs.len(),
            show(Some(r.val)),
            show(r.test),
            show(r.final_test)
        );
    }
    dir.finish()
}

pub fn tune(a: &RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.config)?;
    let search = cfg.search.clone().ok_or_else(|| Failure::usage("tune needs a [search] table"))?;
    let dir = RunDir::for_config(a.out.as_deref(), &cfg, "tune")?;
    cfg.output_dir = Some(dir.path.clone());
    dir.write_config(&cfg)?;
    let frame = match search.oracle {
        Some(_) => None,
        None => Some(load_frame(&cfg)?),
    };
    let report = run_tune(&cfg, frame.as_ref())?;
    write_json(&dir.file("rankings.json"), &report)?;
    write_atomic(&dir.file("distributions.csv"), report.distributions_csv().as_bytes())?;
    println!(
        "{:?} search over {} configurations: {} runs (full grid: {} runs)",
        report.method, report.space_size, report.run_count, report.full_grid_runs
    );
    for r in &report.rankings {
        let top: Vec<String> = r.entries.iter().take(search.top_k).map(|e| e.config.to_string()).collect();
        println!("{}: {}", r.policy, top.join("  "));
    }
    dir.finish()
}

pub fn feature_sweep(a: &RunArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&a.config)?;
    if cfg.sweep.is_none() {
        return Err(Failure::usage("feature-sweep needs a [sweep] table"));
    }
    let dir = RunDir::for_config(a.out.as_deref(), &cfg, "feature-sweep")?;
    cfg.output_dir = Some(dir.path.clone());
    dir.write_config(&cfg)?;
    let frame = load_frame(&cfg)?;
    let report = run_feature_sweep(&cfg, &frame)?;
    write_json(&dir.file("sweep.json"), &report)?;
    for e in &report.entries {
        println!("{:<10} metric {:<10} mean test MAE {:.4}", e.code.to_string(), e.metric.name(), e.mean);
    }
    dir.finish()
}

fn parse_time(text: &str) -> Result<Timestamp, Failure> {
    Timestamp::parse(text).ok_or_else(|| Failure::usage(format!("bad timestamp `{text}`")))
}

fn frame_range(frame: &TimeSeriesFrame, start: Option<&str>, end: Option<&str>) -> Result<Range<usize>, Failure> {
    let ts = frame.timestamps();
    let locate = |t: Timestamp| ts.partition_point(|x| *x < t);
    let lo = start.map(parse_time).transpose()?.map_or(0, locate);
    let hi = end.map(parse_time).transpose()?.map_or(ts.len(), locate);
    if lo >= hi {
        return Err(Failure::usage("the forecast range is empty"));
    }
    Ok(lo..hi)
}

fn add_derived(frame: &mut TimeSeriesFrame, needed: &[ChannelId]) -> Result<(), Failure> {
    if needed.contains(&ChannelId::EVelocity) && !frame.has(ChannelId::EVelocity) {
        equivalent_velocity(frame, DepthConvention::default())?;
    }
    if needed.iter().any(|c| matches!(c, ChannelId::YearSin | ChannelId::YearCos)) && !frame.has(ChannelId::YearSin) {
        time_features(frame)?;
    }
    Ok(())
}

fn cell(v: f64) -> String {
    format!("{v}")
}

pub fn forecast(a: &ForecastArgs) -> Result<(), Failure> {
    let checkpoints: Vec<Checkpoint> = a
        .checkpoints
        .iter()
        .map(|p| {
            let text = String::from_utf8(read_bytes(p)?).map_err(|e| Failure::usage(e.to_string()))?;
            Checkpoint::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        })
        .collect::<Result<_, _>>()?;
    let first = &checkpoints[0];
    let text = String::from_utf8(read_bytes(&a.frame)?).map_err(|e| Failure::usage(e.to_string()))?;
    let mut frame = read_frame_csv(&text)?;
    let mut needed = first.input_channels.clone();
    needed.extend(&first.target_channels);
    add_derived(&mut frame, &needed)?;
    let range = frame_range(&frame, a.start.as_deref(), a.end.as_deref())?;

    let sh = first.shape;
    let spec = WindowSpec::new(sh.w_in, sh.w_out, first.input_channels.clone(), first.target_channels.clone())
        .with_stride(sh.w_out);
    let ds = make_windows_in(&frame, &spec, range.clone())?;
    if ds.samples.is_empty() {
        return Err(Failure::usage("the forecast range holds no complete window"));
    }
    let bundle = forecast_bundle(&checkpoints, &ds)?;

    let mut covered: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (o, s) in ds.samples.iter().enumerate() {
        for step in 0..sh.w_out {
            covered.insert(s.origin_index + step, (o, step));
        }
    }
    let channels = &bundle.channels;
    let mut header = vec!["timestamp".to_string()];
    header.extend(channels.iter().map(|c| format!("actual_{}", c.name())));
    for (m, cfg) in bundle.models.iter().enumerate() {
        header.extend(channels.iter().map(|c| format!("m{m}:{cfg}:{}", c.name())));
    }
    for what in ["mean", "lower95", "upper95"] {
        header.extend(channels.iter().map(|c| format!("{what}_{}", c.name())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| Failure::usage(e.to_string()))?;
    let actual: Vec<_> = channels.iter().map(|c| frame.channel(*c)).collect::<Result<_, _>>()?;
    for row in range.clone() {
        let mut rec = vec![frame.timestamps()[row].to_iso()];
        rec.extend(actual.iter().map(|c| if c.missing[row] { String::new() } else { cell(c.values[row]) }));
        let at = covered.get(&row).copied();
        let pick =
            |values: &[f64], ch: usize| at.map_or(String::new(), |(o, step)| cell(values[bundle.index(o, step, ch)]));
        for p in &bundle.per_model {
            rec.extend((0..channels.len()).map(|ch| pick(p, ch)));
        }
        for values in [&bundle.mean, &bundle.lower, &bundle.upper] {
            rec.extend((0..channels.len()).map(|ch| pick(values, ch)));
        }
        w.write_record(&rec).map_err(|e| Failure::usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::usage(e.to_string()))?;
    write_atomic(&a.out, &bytes)?;
    println!(
        "{} rows, {} forecast windows, {} model(s) -> {}",
        range.len(),
        ds.samples.len(),
        bundle.models.len(),
        a.out.display()
    );
    Ok(())
}

const TOY_GRAPHS: &[&str] =
    &["ss-(6,3)-4-0", "ss2-(6,3)-4-0.2", "fb-(6,3)-4-0.2", "vcn-3-4-2-3-0.2", "fcn-3-4-2-3-0", "dcn-2-4-2-4-0.2"];

#[derive(Serialize)]
struct GradcheckEntry {
    config: String,
    max_rel_error: f64,
    worst: String,
    checked: usize,
    pass: bool,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<(), Failure> {
    let names: Vec<String> =
        if a.configs.is_empty() { TOY_GRAPHS.iter().map(|s| s.to_string()).collect() } else { a.configs.clone() };
    let mut entries = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let cfg = parse_config(name)?;
        let (w_in, w_out) = cfg.window().unwrap_or((a.w_in, a.w_out));
        let shape = BindShape { w_in, w_out, n_in: a.n_in, n_out: a.n_out };
        let mut model = build(&cfg, shape, a.seed)?;
        model.pin_dropout(a.seed);
        let x = Tensor::uniform(
            &[a.batch, w_in, a.n_in],
            1.0,
            &mut scour_core::rng::indexed_stream(a.seed, "gradcheck-input", i as u64),
        );
        let r = gradient_check(model.as_mut(), &x, a.eps)?;
        let pass = r.max_rel_error < a.tolerance;
        println!(
            "{name}: max rel error {:.2e} at {} over {} values: {}",
            r.max_rel_error,
            r.worst,
            r.checked,
            if pass { "PASS" } else { "FAIL" }
        );
        entries.push(GradcheckEntry {
            config: name.clone(),
            max_rel_error: r.max_rel_error,
            worst: r.worst,
            checked: r.checked,
            pass,
        });
    }
    if let Some(out) = &a.out {
        write_json(out, &entries)?;
    }
    match entries.iter().filter(|e| !e.pass).count() {
        0 => Ok(()),
        n => Err(Failure::numeric(format!("{n} graph(s) exceed the tolerance {:e}", a.tolerance))),
    }
}
