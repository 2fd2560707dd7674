use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_manifest, ManifestBuilder};
use super::{Cli, Command, CurveCmd, ExtractArgs, FeaturesCmd, FlowCmd, MetricsCmd, PlotArgs};
use crate::curve::{
    extract_event_curve, pick_peaks, read_curve_csv, read_timeline, windowed_correlation, write_curve_csv,
    write_timeline, CurveConfig, EventCurve,
};
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureSequence};
use crate::flow::{
    read_checkpoint, sample_item, swap_fidelity, synth_dataset, synth_video_curves, train, write_checkpoint,
    Latent, SampleConfig, TrainConfig, VelocityField,
};
use crate::metrics::{beat_scores, curve_fd, scene_cut_hit, temporal_deviation, FdMode, MetricReport};
use crate::plot::render_svg;

const DEFAULT_MANIFEST: &str = "evc-run.manifest.json";

/// Frames as JSON, the text side of `features convert`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturesJson {
    rate_hz: f64,
    source_tag: String,
    frames: Vec<Vec<f64>>,
}

struct Run {
    manifest: ManifestBuilder,
}

impl Run {
    fn read_curve(&mut self, path: &Path) -> Result<EventCurve> {
        self.manifest.input(path);
        read_curve_csv(path)
    }

    fn read_timeline(&mut self, path: &Path) -> Result<crate::curve::EventTimeline> {
        self.manifest.input(path);
        read_timeline(path)
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        self.manifest.output(path);
        Ok(())
    }

    /// Writes the report to `out`, or returns it as the summary line.
    fn report(&mut self, report: &MetricReport, out: Option<&Path>) -> Result<String> {
        match out {
            Some(path) => {
                self.write_text(path, &(report.to_json() + "\n"))?;
                Ok(format!("{} = {} -> {}", report.metric, report.value, path.display()))
            }
            None => Ok(serde_json::to_string(report).expect("report serializes")),
        }
    }
}

pub(super) fn dispatch(cli: &Cli, command_line: Vec<String>) -> Result<String> {
    if cli.jobs == 0 {
        return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let config = serde_json::to_value(&cli.command).expect("arguments serialize");
    let mut run = Run {
        manifest: ManifestBuilder::new(command_line, config),
    };
    let summary = pool.install(|| match &cli.command {
        Command::Features(c) => features(&mut run, c),
        Command::Curve(c) => curve(&mut run, c),
        Command::Metrics(c) => metrics(&mut run, c),
        Command::Flow(c) => flow(&mut run, c),
        Command::Plot(a) => plot(&mut run, a),
    })?;
    let manifest = run.manifest.finish()?;
    let path = match &cli.manifest {
        Some(p) => p.clone(),
        None => manifest
            .outputs
            .first()
            .map(|o| {
                let mut s = o.path.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
            .unwrap_or_else(|| PathBuf::from(DEFAULT_MANIFEST)),
    };
    write_manifest(&manifest, &path)?;
    Ok(summary)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn features(run: &mut Run, cmd: &FeaturesCmd) -> Result<String> {
    match cmd {
        FeaturesCmd::Info { features } => {
            run.manifest.input(features);
            let seq = read_features(features)?;
            Ok(format!(
                "{}: d_f={} l_f={} rate_hz={} source_tag={:?}",
                features.display(),
                seq.dims(),
                seq.len(),
                seq.rate_hz(),
                seq.source_tag()
            ))
        }
        FeaturesCmd::Convert { input, out } => {
            run.manifest.input(input);
            let seq = match extension(input).as_str() {
                "evcf" => read_features(input)?,
                "json" => {
                    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
                    let raw: FeaturesJson = serde_json::from_str(&text)
                        .map_err(|e| Error::Format(format!("{}: {e}", input.display())))?;
                    FeatureSequence::from_frames(&raw.frames, raw.rate_hz, raw.source_tag)?
                }
                other => return Err(Error::Format(format!("cannot read features from '.{other}' files"))),
            };
            match extension(out).as_str() {
                "evcf" => {
                    write_features(&seq, out)?;
                    run.manifest.output(out);
                }
                "json" => {
                    let raw = FeaturesJson {
                        rate_hz: seq.rate_hz(),
                        source_tag: seq.source_tag().to_string(),
                        frames: seq.frames().map(|f| f.to_vec()).collect(),
                    };
                    let text = serde_json::to_string(&raw).expect("features serialize");
                    run.write_text(out, &(text + "\n"))?;
                }
                other => return Err(Error::Format(format!("cannot write features to '.{other}' files"))),
            }
            Ok(format!("{} -> {} ({} frames)", input.display(), out.display(), seq.len()))
        }
    }
}

fn extract(run: &mut Run, args: &ExtractArgs) -> Result<String> {
    let cfg = CurveConfig::new(args.length, args.kernel)?;
    if !(args.duration.is_finite() && args.duration > 0.0) {
        return Err(Error::InvalidData(format!("--duration must be positive, got {}", args.duration)));
    }
    let targets: Vec<PathBuf> = match (&args.out, &args.out_dir) {
        (Some(out), None) if args.features.len() == 1 => vec![out.clone()],
        (Some(_), None) => {
            return Err(Error::InvalidConfig("several inputs need --out-dir instead of --out".into()))
        }
        (None, Some(dir)) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            args.features
                .iter()
                .map(|f| {
                    let stem = f.file_stem().unwrap_or(f.as_os_str());
                    dir.join(stem).with_extension("csv")
                })
                .collect()
        }
        _ => return Err(Error::InvalidConfig("one of --out or --out-dir is required".into())),
    };
    let curves = args
        .features
        .par_iter()
        .map(|f| extract_event_curve(&read_features(f)?, &cfg, args.duration))
        .collect::<Result<Vec<_>>>()?;
    let mut degenerate = 0;
    for ((input, curve), target) in args.features.iter().zip(&curves).zip(&targets) {
        run.manifest.input(input);
        write_curve_csv(curve, target)?;
        run.manifest.output(target);
        if curve.degenerate {
            log::warn!("{}: flat input, wrote the zero curve", input.display());
            degenerate += 1;
        }
    }
    let where_to = if targets.len() == 1 {
        targets[0].display().to_string()
    } else {
        args.out_dir.as_ref().expect("checked above").display().to_string()
    };
    Ok(format!(
        "extracted {} curve(s), L={} K={} ({degenerate} degenerate) -> {where_to}",
        curves.len(),
        cfg.target_length,
        cfg.kernel_size
    ))
}

fn curve(run: &mut Run, cmd: &CurveCmd) -> Result<String> {
    match cmd {
        CurveCmd::Extract(args) => extract(run, args),
        CurveCmd::Correlate {
            a,
            b,
            anchors,
            window,
            out,
        } => {
            let a = run.read_curve(a)?;
            let b = run.read_curve(b)?;
            let anchors = run.read_timeline(anchors)?;
            let wc = windowed_correlation(&a, &b, &anchors, *window)?;
            let report = MetricReport::new("windowed_correlation", wc.mean)
                .param("window_s", *window)
                .param("skipped", json!(wc.skipped))
                .items(wc.per_anchor.iter().copied());
            run.report(&report, out.as_deref())
        }
        CurveCmd::Peaks {
            curve,
            threshold,
            min_separation,
            label,
            out,
        } => {
            let c = run.read_curve(curve)?;
            let mut tl = pick_peaks(&c, *threshold, *min_separation)?;
            tl.label = label.clone();
            write_timeline(&tl, out)?;
            run.manifest.output(out);
            Ok(format!("{} peak(s) -> {}", tl.len(), out.display()))
        }
    }
}

/// Curve CSVs in `dir`, ordered by file name.
fn read_curve_dir(run: &mut Run, dir: &Path) -> Result<(Vec<String>, Vec<EventCurve>)> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && extension(p) == "csv")
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidData(format!("no curve CSVs in {}", dir.display())));
    }
    let curves = paths.par_iter().map(read_curve_csv).collect::<Result<Vec<_>>>()?;
    let names = paths
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    for p in paths {
        run.manifest.input(p);
    }
    Ok((names, curves))
}

fn require<'a>(dir: &'a Option<PathBuf>, flag: &str, mode: FdMode) -> Result<&'a Path> {
    dir.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("mode {mode} needs --{flag}")))
}

fn check_names(a: &[String], b: &[String], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Pairing(format!(
            "{what} file names do not pair up item by item ({} vs {} files)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn metrics(run: &mut Run, cmd: &MetricsCmd) -> Result<String> {
    match cmd {
        MetricsCmd::Sch {
            cuts,
            onsets,
            tolerance,
            out,
        } => {
            let cuts = run.read_timeline(cuts)?;
            let onsets = run.read_timeline(onsets)?;
            let v = scene_cut_hit(&cuts, &onsets, *tolerance)?;
            let report = MetricReport::new("sch", v)
                .param("tolerance_s", *tolerance)
                .param("cuts", cuts.len())
                .param("onsets", onsets.len());
            run.report(&report, out.as_deref())
        }
        MetricsCmd::Beat {
            motion,
            music,
            tolerance,
            out,
        } => {
            let motion = run.read_timeline(motion)?;
            let music = run.read_timeline(music)?;
            let s = beat_scores(&motion, &music, *tolerance)?;
            let report = MetricReport::new("beat_f1", s.f1)
                .param("tolerance_s", *tolerance)
                .param("bcs", s.bcs)
                .param("bhs", s.bhs)
                .param("matched_count", s.matched_count)
                .items([Some(s.bcs), Some(s.bhs), Some(s.f1)]);
            run.report(&report, out.as_deref())
        }
        MetricsCmd::Td { motion, music, out } => {
            let motion = run.read_timeline(motion)?;
            let music = run.read_timeline(music)?;
            let v = temporal_deviation(&motion, &music)?;
            let report = MetricReport::new("td_bpm", v);
            run.report(&report, out.as_deref())
        }
        MetricsCmd::Fd {
            mode,
            gen,
            gt,
            video,
            out,
        } => {
            let mode: FdMode = mode.parse()?;
            let (gen_names, gen_curves) = read_curve_dir(run, gen)?;
            let needs_gt = mode != FdMode::MusicMinusVideo;
            let needs_video = mode != FdMode::Music;
            let (gt_names, gt_curves) = if needs_gt {
                read_curve_dir(run, require(gt, "gt", mode)?)?
            } else {
                (Vec::new(), Vec::new())
            };
            let (video_names, video_curves) = if needs_video {
                read_curve_dir(run, require(video, "video", mode)?)?
            } else {
                (Vec::new(), Vec::new())
            };
            if matches!(mode, FdMode::MusicPlusVideo | FdMode::MusicGivenVideo) {
                check_names(&gen_names, &video_names, "generated and video")?;
                check_names(&gt_names, &video_names, "ground-truth and video")?;
            }
            let fd = curve_fd(&gen_curves, &gt_curves, &video_curves, mode)?;
            let report = MetricReport::new("curve_fd", fd.value)
                .param("mode", mode.as_str())
                .param("squared", true)
                .items(fd.items.iter().map(|v| Some(*v)));
            run.report(&report, out.as_deref())
        }
    }
}

fn flow(run: &mut Run, cmd: &FlowCmd) -> Result<String> {
    match cmd {
        FlowCmd::Train {
            config,
            seed,
            data_seed,
            items,
            out,
            loss_out,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    run.manifest.input(path);
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    TrainConfig::from_json(&text)?
                }
                None => TrainConfig::default(),
            };
            cfg.seed = *seed;
            let data_seed = data_seed.unwrap_or(*seed);
            run.manifest.seed("train", *seed);
            run.manifest.seed("data", data_seed);
            let arch = crate::flow::Architecture::default();
            let data = synth_dataset(data_seed, *items, arch.channels, arch.length, arch.class_count)?;
            let outcome = train(&cfg, arch, &data)?;
            write_checkpoint(&outcome.model, out)?;
            run.manifest.output(out);
            if let Some(path) = loss_out {
                let mut text = String::from("step,loss\n");
                for (i, l) in outcome.loss_trace.iter().enumerate() {
                    text.push_str(&format!("{i},{l}\n"));
                }
                run.write_text(path, &text)?;
            }
            Ok(format!(
                "trained {} steps, running loss {:.4} -> {:.4} -> {}",
                cfg.steps,
                outcome.initial_running_mean(),
                outcome.final_running_mean(),
                out.display()
            ))
        }
        FlowCmd::Sample {
            model,
            seed,
            steps,
            cfg_scale,
            curve,
            class,
            count,
            out,
        } => {
            run.manifest.input(model);
            let model = read_checkpoint(model)?;
            let curve = curve.as_deref().map(|p| run.read_curve(p)).transpose()?;
            run.manifest.seed("sample", *seed);
            if *count == 0 {
                return Err(Error::InvalidConfig("--count must be at least 1".into()));
            }
            let cfg = SampleConfig {
                steps: *steps,
                cfg_scale: *cfg_scale,
                seed: *seed,
                curve,
                class_id: *class,
            };
            let latents = (0..*count as u64)
                .into_par_iter()
                .map(|i| sample_item(&model, &cfg, i))
                .collect::<Result<Vec<Latent>>>()?;
            let text = serde_json::to_string(&latents).expect("latents serialize");
            run.write_text(out, &(text + "\n"))?;
            let (d, l) = model.shape();
            Ok(format!("sampled {count} latent(s) of {d}x{l} in {steps} steps -> {}", out.display()))
        }
        FlowCmd::SwapEval {
            model,
            seed,
            curves,
            synthetic,
            curve_seed,
            steps,
            cfg_scale,
            class,
            out,
        } => {
            run.manifest.input(model);
            let model = read_checkpoint(model)?;
            run.manifest.seed("sample", *seed);
            let curves = match curves {
                Some(dir) => read_curve_dir(run, dir)?.1,
                None => {
                    let cs = curve_seed.unwrap_or(*seed);
                    run.manifest.seed("curves", cs);
                    synth_video_curves(cs, *synthetic, model.shape().1)?
                }
            };
            let cfg = SampleConfig {
                steps: *steps,
                cfg_scale: *cfg_scale,
                seed: *seed,
                curve: None,
                class_id: *class,
            };
            let r = swap_fidelity(&model, &curves, &cfg)?;
            let report = MetricReport::new("swap_fidelity", r.mean)
                .param("cfg_scale", *cfg_scale)
                .param("steps", *steps)
                .param("curves", curves.len())
                .param("skipped", json!(r.skipped))
                .items(r.per_item.iter().copied());
            run.report(&report, out.as_deref())
        }
    }
}

fn plot(run: &mut Run, args: &PlotArgs) -> Result<String> {
    let curves = args
        .curves
        .iter()
        .map(|p| run.read_curve(p))
        .collect::<Result<Vec<_>>>()?;
    let events = args.events.as_deref().map(|p| run.read_timeline(p)).transpose()?;
    let svg = render_svg(&curves, events.as_ref())?;
    run.write_text(&args.out, &svg)?;
    Ok(format!("plotted {} curve(s) -> {}", curves.len(), args.out.display()))
}
