use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use touchprint_core::capture::{start_session, SessionStatus};
use touchprint_core::enhancement::{render_fingerprint, FingerprintImage};
use touchprint_core::evaluation::{
    cross_compare, fuse_records, parse_sample_name, read_scores, score_set, write_report, write_scores, EvaluationReport,
    FusionSize, ScoreRecord, TemplateEntry,
};
use touchprint_core::geometry::{FingerId, HandSide};
use touchprint_core::imageio::{read_image, write_channel, write_image, write_mask_png};
use touchprint_core::matcher::compare_templates;
use touchprint_core::minutiae::{extract_template, read_template, write_template};
use touchprint_core::par::Exec;
use touchprint_core::pipeline::{assess_sample, hand_mask, locate_hand};
use touchprint_core::quality::{gradient_histogram, histogram_csv};
use touchprint_core::raster::to_grayscale;
use touchprint_core::segmentation::segment_hand;
use touchprint_core::synth::{capture_hand, corpus, render_hand};
use touchprint_core::{Error, PipelineConfig};

use crate::error::CliError;
use crate::{Cli, Command, EvaluateArgs, SynthCommand};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(cli.config.as_deref(), &cli.set)?;
    match cli.command {
        Command::Segment { image, out, raw } => segment(&cfg, &image, &out, raw),
        Command::Process { image, hand, out, subject, session, debug } => {
            process(&cfg, &image, hand.into(), &out, &subject, &session, debug)
        }
        Command::Extract { image, finger, out } => extract(&cfg, &image, finger, &out),
        Command::Match { a, b } => {
            let score = compare_templates(&read_template(&a)?, &read_template(&b)?, &cfg.matcher)?;
            println!("{:.6}", score.value);
            Ok(())
        }
        Command::CaptureSim { frames, hand, out, subject, session } => capture_sim(&cfg, &frames, hand.into(), &out, &subject, &session),
        Command::Evaluate(args) => evaluate(&cfg, &args),
        Command::Config => {
            println!("{}", cfg.to_json_pretty());
            Ok(())
        }
        Command::Synth { what } => synth(what, cli.seed),
    }
}

fn effective_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    for kv in overrides {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source }.into())
}

fn sample_name(subject: &str, finger: FingerId, session: &str) -> String {
    format!("{subject}_{}_{session}", finger.code())
}

fn segment(cfg: &PipelineConfig, image: &Path, out: &Path, raw: bool) -> Result<()> {
    let frame = read_image(image)?;
    let mask = if raw { segment_hand(&frame, &cfg.segmentation)? } else { hand_mask(&frame, cfg)? };
    write_mask_png(&mask, out)?;
    println!("{}\t{} px", out.display(), mask.count());
    Ok(())
}

fn process(cfg: &PipelineConfig, image: &Path, hand: HandSide, out: &Path, subject: &str, session: &str, debug: bool) -> Result<()> {
    let frame = read_image(image)?;
    let located = locate_hand(&frame, hand, cfg, Exec::Sequential)?;
    create_dir(out)?;
    for (crop, id) in &located {
        let name = sample_name(subject, *id, session);
        let fp = render_fingerprint(crop, Some(*id), &cfg.enhancement)?;
        let path = out.join(format!("{name}.png"));
        write_channel(&fp.gray, &path)?;
        let q = assess_sample(&fp, cfg)?;
        println!(
            "{}\tquality {} sharpness {:.4} {}",
            path.display(),
            q.composite,
            q.sharpness,
            if q.passed { "passed" } else { "failed" }
        );
        if debug {
            write_image(&crop.image, out.join(format!("{name}_crop.png")))?;
            write_mask_png(&crop.mask, out.join(format!("{name}_crop_mask.png")))?;
            if let Ok(hist) = gradient_histogram(&fp, &cfg.quality) {
                let p = out.join(format!("{name}_gradients.csv"));
                fs::write(&p, histogram_csv(&hist)).map_err(|source| Error::Io { path: p.clone(), source })?;
            }
        }
    }
    Ok(())
}

fn extract(cfg: &PipelineConfig, image: &Path, finger: Option<u8>, out: &Path) -> Result<()> {
    let finger = match finger {
        Some(code) => FingerId::new(code).map_err(|_| CliError::Usage(format!("invalid finger id {code}")))?,
        None => {
            let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            parse_sample_name(stem)
                .map(|(_, f, _)| f)
                .map_err(|_| CliError::Usage(format!("cannot tell the finger of {}; pass --finger", image.display())))?
        }
    };
    let fp = FingerprintImage::from_gray(to_grayscale(&read_image(image)?), Some(finger));
    let t = extract_template(&fp, finger, &cfg.minutiae)?;
    write_template(&t, out)?;
    println!("{}\t{} minutiae", out.display(), t.len());
    Ok(())
}

fn frame_paths(spec: &str) -> Result<Vec<PathBuf>> {
    let dir = Path::new(spec);
    let mut paths: Vec<PathBuf> = if dir.is_dir() {
        fs::read_dir(dir)
            .map_err(|source| Error::Io { path: dir.to_path_buf(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let ext = p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
                matches!(ext.as_deref(), Some("png" | "pgm" | "ppm" | "pnm"))
            })
            .collect()
    } else {
        glob::glob(spec)
            .map_err(|e| CliError::Usage(format!("bad frame pattern {spec:?}: {e}")))?
            .filter_map(|p| p.ok())
            .filter(|p| p.is_file())
            .collect()
    };
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no frames match {spec:?}")));
    }
    Ok(paths)
}

fn capture_sim(cfg: &PipelineConfig, frames: &str, hand: HandSide, out: &Path, subject: &str, session: &str) -> Result<()> {
    let paths = frame_paths(frames)?;
    let mut st = start_session(hand, cfg);
    for p in &paths {
        if st.is_closed() {
            break;
        }
        let feedback = st.process_frame(&read_image(p)?)?;
        let counts: Vec<String> = st.buffers.iter().map(|b| b.len().to_string()).collect();
        println!(
            "{}\t{}\t[{}]",
            p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
            serde_json::to_value(feedback).expect("feedback serializes").as_str().unwrap_or_default(),
            counts.join(" ")
        );
    }
    create_dir(out)?;
    let log_path = out.join("session.json");
    let log = serde_json::to_string_pretty(&st.log()).expect("log serializes") + "\n";
    fs::write(&log_path, log).map_err(|source| Error::Io { path: log_path.clone(), source })?;
    match st.status {
        SessionStatus::Done => {}
        SessionStatus::Failed => return Err(CliError::CaptureFailed { frames_seen: st.frames_seen }),
        _ => return Err(Error::NotDone.into()),
    }
    for (sample, template) in st.finalize()? {
        let name = sample_name(subject, sample.finger_id, session);
        write_channel(&sample.image.gray, out.join(format!("{name}.png")))?;
        write_template(&template, out.join(format!("{name}.mtft")))?;
        println!("{name}\tquality {}\t{} minutiae", sample.quality.composite, template.len());
    }
    Ok(())
}

fn template_entries(dirs: &[PathBuf]) -> Result<Vec<TemplateEntry>> {
    let mut paths = Vec::new();
    for dir in dirs {
        for e in fs::read_dir(dir).map_err(|source| Error::Io { path: dir.clone(), source })? {
            let p = e.map_err(|source| Error::Io { path: dir.clone(), source })?.path();
            if p.extension().is_some_and(|x| x == "mtft") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let (subject, finger, session) = parse_sample_name(stem)?;
            let template = read_template(p)?;
            if template.finger_id != finger {
                return Err(Error::Parse(format!("{} holds finger {}, not {}", p.display(), template.finger_id.code(), finger.code())).into());
            }
            Ok(TemplateEntry { subject, session, template })
        })
        .collect()
}

fn evaluate(cfg: &PipelineConfig, args: &EvaluateArgs) -> Result<()> {
    let mut records: Vec<ScoreRecord> = match &args.scores {
        Some(path) => read_scores(path)?,
        None => {
            let entries = template_entries(&args.templates)?;
            let exec = Exec::default();
            exec.with_jobs(args.jobs, || cross_compare(&entries, &cfg.matcher, exec))?
        }
    };
    if let Some(path) = &args.scores_out {
        write_scores(&records, path)?;
    }
    if let Some(n) = &args.fuse {
        let size: FusionSize = n.parse()?;
        records = fuse_records(&records, size, cfg.matcher.fusion)?;
    }
    let echo = serde_json::json!({
        "pipeline": cfg,
        "fuse": args.fuse.as_deref().map(|n| n.parse::<u8>().expect("validated by clap")),
    });
    let mut report = EvaluationReport::from_scores(&score_set(&records), echo)?;
    if let Some(attempts) = args.attempts {
        report = report.with_fta(attempts, args.failures.unwrap_or(0))?;
    }
    match &args.out {
        Some(path) => {
            let det = write_report(&report, path)?;
            println!(
                "eer {:.6} (discrete {:.6})\t{} genuine\t{} impostor",
                report.eer, report.eer_discrete, report.counts.genuine, report.counts.impostor
            );
            if let Some(fta) = report.fta {
                println!("fta {fta:.6}");
            }
            println!("{}\n{}", path.display(), det.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(())
}

fn synth(what: SynthCommand, seed: u64) -> Result<()> {
    match what {
        SynthCommand::Corpus { subjects, out } => {
            create_dir(&out)?;
            for s in corpus(subjects, seed, Exec::default()) {
                let path = out.join(format!("{}.png", sample_name(&s.subject, s.finger, &s.session)));
                write_channel(&s.image.gray, &path)?;
                println!("{}", path.display());
            }
        }
        SynthCommand::Frames { count, hand, blur, out } => {
            if !(blur >= 0.0 && blur.is_finite()) {
                return Err(CliError::Usage(format!("--blur must be a finite sigma >= 0, got {blur}")));
            }
            create_dir(&out)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for k in 0..count {
                let mut spec = capture_hand(&mut rng, hand.into());
                spec.blur_sigma = blur;
                let path = out.join(format!("frame_{k:04}.png"));
                write_image(&render_hand(&spec, &mut rng).image, &path)?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
