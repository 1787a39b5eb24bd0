mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use actsense::annotations::import_normalized_jsonl;
use actsense::classifier::{forward, GradInstance, MlpParams};
use actsense::embedding::FusionMask;
use actsense::evaluation::{average_precision, fewshot_subsets};
use actsense::pipeline::{execute, Command, PipelineConfig, CHECKPOINT_FILE, DESCRIPTIONS_FILE, REPORT_FILE};
use actsense::prompt::{render_description_prompt, render_subsequent_prompt};
use actsense::synthetic::synthetic_vocabulary;
use common::{fixture_vocab, golden, load_fixtures, synthetic_setup, triple};
use rand::{Rng, SeedableRng};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn run(cmd: Command, cfg: &PipelineConfig) -> Result<Option<f64>, String> {
    let out = execute(cmd, cfg);
    match out.error {
        None => Ok(out.map),
        Some(e) => Err(format!("{} failed: {e}", cmd.name())),
    }
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| e.to_string())).collect()
}

fn prompts() -> Result<String, String> {
    let fixtures = load_fixtures();
    ensure!(fixtures.len() == 5, "expected 5 fixtures, found {}", fixtures.len());
    let vocab = fixture_vocab(&fixtures);
    for f in &fixtures {
        let d = render_description_prompt(&triple(f, &vocab), &vocab).map_err(|e| e.to_string())?;
        ensure!(d.text == golden(&f.name, "description"), "{}: description prompt differs", f.name);
        let s = render_subsequent_prompt(&f.description).map_err(|e| e.to_string())?;
        ensure!(s.text == golden(&f.name, "subsequent"), "{}: subsequent prompt differs", f.name);
        let last = s.text.lines().last().unwrap_or_default();
        ensure!(last.ends_with("The person then proceeds to "), "{}: bad final line {last:?}", f.name);
    }
    Ok("5 fixtures byte-exact".into())
}

fn oracle_ap(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n = scores.len();
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let rank = |i: usize| 1 + (0..n).filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i)).count();
    let total: f64 = (0..n)
        .filter(|&i| labels[i])
        .map(|i| {
            let r = rank(i);
            (0..n).filter(|&j| labels[j] && rank(j) <= r).count() as f64 / r as f64
        })
        .sum();
    Some(total / positives as f64)
}

fn ap_oracle() -> Result<String, String> {
    let hand = average_precision(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).map_err(|e| e.to_string())?;
    ensure!(hand.is_some_and(|v| (v - 5.0 / 6.0).abs() < 1e-12), "hand case gave {hand:?}");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(1..=12);
        let levels = rng.random_range(2..=8);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let got = average_precision(&scores, &labels).map_err(|e| e.to_string())?;
        let want = oracle_ap(&scores, &labels);
        match (got, want) {
            (None, None) => {}
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            _ => return Err(format!("case {case}: {got:?} vs oracle {want:?}")),
        }
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    Ok(format!("1000 instances, max deviation {worst:e}"))
}

fn gradients() -> Result<String, String> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let din = rng.random_range(1..=16);
        let n = rng.random_range(1..=5);
        let hidden = [rng.random_range(2..=12), rng.random_range(2..=12)];
        let err = GradInstance::random(i, din, hidden, n).max_relative_error(1e-4);
        worst = worst.max(err);
    }
    ensure!(worst <= 1e-4, "max relative error {worst:e}");
    Ok(format!("50 instances, max relative error {worst:e}"))
}

fn separability() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_setup(dir.path(), 200);
    let map = run(Command::Run, &cfg)?.ok_or("run reported no mAP")?;
    ensure!(map >= 0.95, "test mAP {map:.4} < 0.95");
    run(Command::Ablate, &cfg)?;
    let rows = csv_rows(&cfg.out.join("ablation.csv"))?;
    let get = |mask: FusionMask| -> Result<f64, String> {
        let name = mask.to_string();
        let row = rows.iter().find(|r| r[0] == name).ok_or(format!("no ablation row {name}"))?;
        row[1].parse::<f64>().map_err(|_| format!("row {name} failed: {}", row[2]))
    };
    let (image, image_current, full) = (get(FusionMask::IMAGE)?, get(FusionMask::IMAGE_CURRENT)?, get(FusionMask::FULL)?);
    ensure!(image < image_current && image_current <= full, "ordering broken: {image:.4} / {image_current:.4} / {full:.4}");
    Ok(format!("mAP {map:.4}; image {image:.4} < image+current {image_current:.4} <= full {full:.4}"))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = synthetic_setup(dir.path(), 200);
    let cold = |name: &str| PipelineConfig {
        out: dir.path().join(name),
        cache_dir: Some(dir.path().join(format!("cache-{name}"))),
        ..base.clone()
    };
    let (a, b) = (cold("a"), cold("b"));
    run(Command::Run, &a)?;
    run(Command::Run, &b)?;
    for f in [DESCRIPTIONS_FILE, CHECKPOINT_FILE, REPORT_FILE] {
        let (x, y) = (std::fs::read(a.out.join(f)), std::fs::read(b.out.join(f)));
        ensure!(matches!((&x, &y), (Ok(x), Ok(y)) if x == y), "{f} differs between cold runs");
    }
    let warm = PipelineConfig { out: dir.path().join("warm"), ..a.clone() };
    let outcome = execute(Command::Run, &warm);
    ensure!(outcome.error.is_none(), "warm run failed: {:?}", outcome.error);
    let counters = outcome.manifest.ok_or("no manifest")?.counters;
    ensure!(counters.generation_backend_calls == 0, "warm run made {} backend calls", counters.generation_backend_calls);
    Ok(format!("3 artifacts identical; warm rerun {} cache hits, 0 backend calls", counters.generation_cache_hits))
}

fn fewshot() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_setup(dir.path(), 200);
    ensure!(cfg.fewshot_fractions == [0.1, 0.25, 0.5, 1.0], "unexpected fractions {:?}", cfg.fewshot_fractions);
    let plain = run(Command::Run, &cfg)?.ok_or("run reported no mAP")?;
    run(Command::Fewshot, &cfg)?;
    let rows = csv_rows(&cfg.out.join("fewshot.csv"))?;
    ensure!(rows.len() == 4, "expected 4 rows, got {}", rows.len());

    let train = import_normalized_jsonl(cfg.train_data.as_ref().unwrap(), &synthetic_vocabulary()).map_err(|e| e.to_string())?;
    let ids: Vec<&str> = train.iter().map(|v| v.video_id.as_str()).collect();
    let subsets = fewshot_subsets(&ids, &cfg.fewshot_fractions, cfg.train.seed).map_err(|e| e.to_string())?;
    for (w, row) in subsets.windows(2).zip(&rows) {
        let small: BTreeSet<&String> = w[0].iter().collect();
        let large: BTreeSet<&String> = w[1].iter().collect();
        ensure!(small.is_subset(&large) && small.len() < large.len(), "subsets not nested at {}", row[0]);
    }
    for (s, row) in subsets.iter().zip(&rows) {
        ensure!(row[1] == s.len().to_string(), "row {} trained on {} videos, subset has {}", row[0], row[1], s.len());
    }
    let last: f64 = rows[3][2].parse().map_err(|_| "bad map column".to_string())?;
    ensure!((last - plain).abs() <= 1e-9, "f=1.0 gave {last} vs plain run {plain}");
    let maps: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    Ok(format!("sizes {:?}, maps {:?}", subsets.iter().map(Vec::len).collect::<Vec<_>>(), maps))
}

fn shapes() -> Result<String, String> {
    let width = FusionMask::FULL.fused_width(512);
    ensure!(width == 1536, "fused width {width}");
    let params = MlpParams::init(width, 157, 0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f32> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scores = forward(&params, &x).map_err(|e| e.to_string())?;
    ensure!(scores.0.len() == 157, "{} scores", scores.0.len());
    ensure!(scores.0.iter().all(|&s| s > 0.0 && s < 1.0), "score outside (0, 1)");
    ensure!(forward(&params, &x[..1024]).is_err(), "width 1024 accepted");
    Ok("1536 -> 512 -> 512 -> 157".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, u64); 7] = [
        ("prompt byte-exactness", prompts, 1),
        ("mAP oracle equivalence", ap_oracle, 5),
        ("gradient correctness", gradients, 30),
        ("synthetic separability and ablation order", separability, 120),
        ("determinism and caching", determinism, 60),
        ("few-shot harness", fewshot, 180),
        ("shape contract", shapes, 1),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget}s"))
            }
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS {} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
