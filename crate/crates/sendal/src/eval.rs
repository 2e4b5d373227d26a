//! Accuracy, reliability, and efficiency metrics plus the anchored
//! walk-forward evaluation protocol.
//!
//! The series is cut into fold_count+1 contiguous equal segments; fold k
//! trains the full bottom-up pipeline on segments 1..k and tests on segment
//! k+1, so every test sample strictly follows all of its training data.
//! Each fold also evaluates the two phase-1 baselines (linear-only and
//! component-only) on the identical test windows.
//!
//! Energy is not measured directly; the deterministic multiply-accumulate
//! count of the executed layers stands in for it. Wall-clock latency is
//! measured only when asked (it is inherently non-deterministic, and file
//! outputs stay byte-identical across runs when it is off).

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{Branch, CoreKind, SendalModel};
use crate::scalar::Scalar;
use crate::series::{make_windows, SensorPairDataset};
use crate::train::{train_full, TrainConfig};

/// Miss-ratio thresholds reported by the evaluation protocol.
pub const MISS_THRESHOLDS: [f64; 4] = [3.0, 5.0, 10.0, 30.0];

pub fn rmse<T: Scalar>(pred: &[T], truth: &[T]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::invalid("rmse: need equal, non-empty inputs"));
    }
    let sum: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| {
            let d = p.as_f64() - t.as_f64();
            d * d
        })
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Fraction of predictions whose absolute error meets or exceeds theta_m.
pub fn miss_ratio<T: Scalar>(pred: &[T], truth: &[T], theta_m: f64) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::invalid("miss ratio: need equal, non-empty inputs"));
    }
    if !(theta_m > 0.0) {
        return Err(Error::invalid("miss ratio: threshold must be positive"));
    }
    let misses = pred
        .iter()
        .zip(truth.iter())
        .filter(|(p, t)| (p.as_f64() - t.as_f64()).abs() >= theta_m)
        .count();
    Ok(misses as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub count: usize,
}

/// Which inference path a benchmark drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    TopDown,
    LinearOnly,
    ComponentOnly,
}

/// Per-inference wall-clock benchmark at 32-bit precision. Runs one
/// unmeasured warmup pass, then `repeats` measured passes over the windows.
/// Requires at least 1,000 measured evaluations in total. Must run
/// single-threaded and alone for trustworthy numbers.
pub fn latency_bench(
    model: &SendalModel<f32>,
    windows: &[Vec<f32>],
    repeats: usize,
    mode: BenchMode,
) -> Result<LatencyStats> {
    if windows.is_empty() || repeats == 0 {
        return Err(Error::invalid("latency bench: empty workload"));
    }
    let count = windows.len() * repeats;
    if count < 1000 {
        return Err(Error::invalid(format!(
            "latency bench: {count} evaluations < 1000; raise repeats"
        )));
    }
    let run = |w: &[f32]| -> Result<f32> {
        match mode {
            BenchMode::TopDown => Ok(model.top_down_infer(w)?.0),
            BenchMode::LinearOnly => model.infer_linear(w),
            BenchMode::ComponentOnly => model.infer_component(w),
        }
    };
    // Warmup (also surfaces shape errors before timing starts).
    let mut sink = 0.0f32;
    for w in windows {
        sink += run(w)?;
    }
    let mut samples_ns = Vec::with_capacity(count);
    for _ in 0..repeats {
        for w in windows {
            let start = Instant::now();
            let value = run(w)?;
            samples_ns.push(start.elapsed().as_nanos() as u64);
            sink += value;
        }
    }
    std::hint::black_box(sink);
    samples_ns.sort_unstable();
    let n = samples_ns.len();
    let mean = samples_ns.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
    let median = samples_ns[n / 2] as f64;
    let p95 = samples_ns[((n as f64 * 0.95).ceil() as usize - 1).min(n - 1)] as f64;
    Ok(LatencyStats {
        mean_us: mean / 1000.0,
        median_us: median / 1000.0,
        p95_us: p95 / 1000.0,
        count: n,
    })
}

/// One fold of the anchored plan: train on [0, train_end), test on
/// [test_start, test_end).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub segment_len: usize,
    pub folds: Vec<FoldSpec>,
}

/// Anchored split: fold_count+1 equal contiguous segments, expanding train
/// prefix, test on the following segment. A tail remainder shorter than one
/// segment is dropped.
pub fn plan_anchored(len: usize, fold_count: usize, window_n: usize) -> Result<FoldPlan> {
    if fold_count == 0 {
        return Err(Error::invalid("walk-forward: fold count must be >= 1"));
    }
    if len < fold_count * (window_n + 10) {
        return Err(Error::invalid(format!(
            "walk-forward: need at least {} samples, have {len}",
            fold_count * (window_n + 10)
        )));
    }
    let segment_len = len / (fold_count + 1);
    if segment_len <= window_n {
        return Err(Error::invalid(
            "walk-forward: segments shorter than the window size",
        ));
    }
    let folds = (1..=fold_count)
        .map(|k| FoldSpec {
            fold_id: k,
            train_end: k * segment_len,
            test_start: k * segment_len,
            test_end: (k + 1) * segment_len,
        })
        .collect();
    Ok(FoldPlan {
        fold_count,
        segment_len,
        folds,
    })
}

/// Model variants compared on every fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Sendal,
    LinearOnly,
    ComponentOnly,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Sendal => "sendal",
            Variant::LinearOnly => "linear-only",
            Variant::ComponentOnly => "component-only",
        })
    }
}

/// Metrics for one (fold, variant) pair; `fold_id` None marks the aggregate
/// row (arithmetic mean of the per-fold metrics).
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub fold_id: Option<usize>,
    pub variant: Variant,
    pub rmse: f64,
    /// (theta_m, ratio) pairs over MISS_THRESHOLDS.
    pub miss_ratios: Vec<(f64, f64)>,
    pub mean_macs: f64,
    pub linear_fraction: f64,
    pub linear_count: usize,
    pub component_count: usize,
    pub latency: Option<LatencyStats>,
}

impl EvalReport {
    pub fn component_fraction(&self) -> f64 {
        1.0 - self.linear_fraction
    }
}

/// Per-fold test-set predictions for all three variants, kept for
/// downstream analysis (reliability thresholds, plots).
#[derive(Debug, Clone)]
pub struct FoldPredictions {
    pub fold_id: usize,
    pub target_indices: Vec<usize>,
    pub truth: Vec<f64>,
    pub sendal: Vec<f64>,
    pub linear_only: Vec<f64>,
    pub component_only: Vec<f64>,
}

#[derive(Debug)]
pub struct WalkForwardOutcome {
    pub plan: FoldPlan,
    /// Three reports per fold, in (fold, variant) order.
    pub folds: Vec<EvalReport>,
    /// One aggregate report per variant.
    pub aggregates: Vec<EvalReport>,
    pub predictions: Vec<FoldPredictions>,
}

impl WalkForwardOutcome {
    pub fn aggregate(&self, variant: Variant) -> &EvalReport {
        self.aggregates
            .iter()
            .find(|r| r.variant == variant)
            .expect("aggregate present for every variant")
    }
}

fn report_from_predictions(
    fold_id: usize,
    variant: Variant,
    pred: &[f64],
    truth: &[f64],
    mean_macs: f64,
    linear_count: usize,
    component_count: usize,
    latency: Option<LatencyStats>,
) -> Result<EvalReport> {
    let miss_ratios = MISS_THRESHOLDS
        .iter()
        .map(|t| Ok((*t, miss_ratio(pred, truth, *t)?)))
        .collect::<Result<Vec<_>>>()?;
    let total = linear_count + component_count;
    Ok(EvalReport {
        fold_id: Some(fold_id),
        variant,
        rmse: rmse(pred, truth)?,
        miss_ratios,
        mean_macs,
        linear_fraction: if total > 0 {
            linear_count as f64 / total as f64
        } else {
            0.0
        },
        linear_count,
        component_count,
        latency,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    collected.iter().sum::<f64>() / collected.len() as f64
}

fn aggregate_reports(folds: &[EvalReport], variant: Variant) -> EvalReport {
    let of_variant: Vec<&EvalReport> = folds.iter().filter(|r| r.variant == variant).collect();
    let miss_ratios = MISS_THRESHOLDS
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (
                *t,
                mean(of_variant.iter().map(|r| r.miss_ratios[i].1)),
            )
        })
        .collect();
    EvalReport {
        fold_id: None,
        variant,
        rmse: mean(of_variant.iter().map(|r| r.rmse)),
        miss_ratios,
        mean_macs: mean(of_variant.iter().map(|r| r.mean_macs)),
        linear_fraction: mean(of_variant.iter().map(|r| r.linear_fraction)),
        linear_count: of_variant.iter().map(|r| r.linear_count).sum(),
        component_count: of_variant.iter().map(|r| r.component_count).sum(),
        latency: None,
    }
}

fn fold_seed(base: u64, fold_id: usize) -> u64 {
    base.wrapping_add((fold_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Latency measured over the fold's test windows at 32-bit precision, with
/// enough repeats to reach 1,000 evaluations.
fn measure_latency(model32: &SendalModel<f32>, windows: &[Vec<f32>], mode: BenchMode) -> Result<LatencyStats> {
    let repeats = (1000 / windows.len().max(1)) + 1;
    latency_bench(model32, windows, repeats.max(1), mode)
}

/// Full anchored walk-forward evaluation: trains one bottom-up pipeline per
/// fold and scores the routed model against both phase-1 baselines on the
/// fold's test windows.
pub fn anchored_walk_forward(
    ds: &SensorPairDataset<f64>,
    cfg: &TrainConfig,
    core_kind: CoreKind,
    fold_count: usize,
    measure_latency_too: bool,
) -> Result<WalkForwardOutcome> {
    cfg.validate()?;
    let plan = plan_anchored(ds.len(), fold_count, cfg.window_n)?;
    let all_windows = make_windows(ds, cfg.window_n)?;
    let mut fold_reports = Vec::with_capacity(3 * plan.folds.len());
    let mut predictions = Vec::with_capacity(plan.folds.len());

    for fold in &plan.folds {
        let train_ds = ds.prefix(fold.train_end);
        let fold_cfg = TrainConfig {
            seed: fold_seed(cfg.seed, fold.fold_id),
            ..cfg.clone()
        };
        let outcome = train_full(&train_ds, &fold_cfg, core_kind)?;

        let test: Vec<(&[f64], f64)> = all_windows
            .iter()
            .filter(|(w, _)| {
                w.target_index >= fold.test_start && w.target_index < fold.test_end
            })
            .map(|(w, y)| (w.values, *y))
            .collect();
        if test.is_empty() {
            return Err(Error::invalid(format!(
                "fold {}: no test windows",
                fold.fold_id
            )));
        }
        let truth: Vec<f64> = test.iter().map(|(_, y)| *y).collect();

        let model32: Option<SendalModel<f32>> = if measure_latency_too {
            Some(outcome.model.cast())
        } else {
            None
        };
        let windows32: Option<Vec<Vec<f32>>> = model32.as_ref().map(|_| {
            test.iter()
                .map(|(w, _)| w.iter().map(|v| *v as f32).collect())
                .collect()
        });

        // Routed model, with the model's own gate-skip period.
        let routed = outcome
            .model
            .infer_stream(test.iter().map(|(w, _)| *w), cfg.skip_period)?;
        let sendal_pred: Vec<f64> = routed.iter().map(|(v, _)| *v).collect();
        let macs: f64 = routed
            .iter()
            .map(|(_, d)| outcome.model.count_macs(d) as f64)
            .sum::<f64>()
            / routed.len() as f64;
        let linear_count = routed
            .iter()
            .filter(|(_, d)| d.branch == Branch::Linear)
            .count();
        let latency = match (&model32, &windows32) {
            (Some(m), Some(w)) => Some(measure_latency(m, w, BenchMode::TopDown)?),
            _ => None,
        };
        fold_reports.push(report_from_predictions(
            fold.fold_id,
            Variant::Sendal,
            &sendal_pred,
            &truth,
            macs,
            linear_count,
            routed.len() - linear_count,
            latency,
        )?);

        // Phase-1 linear baseline.
        let lin_pred: Vec<f64> = test
            .iter()
            .map(|(w, _)| outcome.phase1_linear.forward(w))
            .collect();
        let latency = match (&model32, &windows32) {
            (Some(m), Some(w)) => Some(measure_latency(m, w, BenchMode::LinearOnly)?),
            _ => None,
        };
        fold_reports.push(report_from_predictions(
            fold.fold_id,
            Variant::LinearOnly,
            &lin_pred,
            &truth,
            outcome.model.linear_macs() as f64,
            test.len(),
            0,
            latency,
        )?);

        // Phase-1 component baseline.
        let comp_pred: Vec<f64> = test
            .iter()
            .map(|(w, _)| outcome.phase1_component.forward(w))
            .collect();
        let latency = match (&model32, &windows32) {
            (Some(m), Some(w)) => Some(measure_latency(m, w, BenchMode::ComponentOnly)?),
            _ => None,
        };
        fold_reports.push(report_from_predictions(
            fold.fold_id,
            Variant::ComponentOnly,
            &comp_pred,
            &truth,
            outcome.model.component_macs() as f64,
            0,
            test.len(),
            latency,
        )?);

        predictions.push(FoldPredictions {
            fold_id: fold.fold_id,
            target_indices: all_windows
                .iter()
                .filter(|(w, _)| {
                    w.target_index >= fold.test_start && w.target_index < fold.test_end
                })
                .map(|(w, _)| w.target_index)
                .collect(),
            truth,
            sendal: sendal_pred,
            linear_only: lin_pred,
            component_only: comp_pred,
        });
    }

    let aggregates = [Variant::Sendal, Variant::LinearOnly, Variant::ComponentOnly]
        .into_iter()
        .map(|v| aggregate_reports(&fold_reports, v))
        .collect();
    Ok(WalkForwardOutcome {
        plan,
        folds: fold_reports,
        aggregates,
        predictions,
    })
}

fn variant_cells(report: &EvalReport) -> String {
    let (lat_med, lat_p95) = match &report.latency {
        Some(l) => (format!("{}", l.median_us), format!("{}", l.p95_us)),
        None => (String::new(), String::new()),
    };
    format!(
        "{},{},{},{},{},{},{lat_med},{lat_p95}",
        report.rmse,
        report.miss_ratios[0].1,
        report.miss_ratios[1].1,
        report.miss_ratios[2].1,
        report.miss_ratios[3].1,
        report.mean_macs,
    )
}

/// CSV serialization: one row per fold plus an `aggregate` row; each row
/// carries the routed model's metrics and both baselines' column groups.
pub fn reports_to_csv(outcome: &WalkForwardOutcome, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let block = |prefix: &str| {
        format!(
            "{p}_rmse,{p}_miss_3,{p}_miss_5,{p}_miss_10,{p}_miss_30,{p}_mean_macs,{p}_latency_median_us,{p}_latency_p95_us",
            p = prefix
        )
    };
    let _ = writeln!(
        out,
        "fold,sendal_linear_fraction,{},{},{}",
        block("sendal"),
        block("linear"),
        block("component")
    );
    let rows: Vec<(String, Vec<&EvalReport>)> = {
        let mut rows = Vec::new();
        for chunk in outcome.folds.chunks(3) {
            let fold = chunk[0].fold_id.expect("fold rows carry ids").to_string();
            rows.push((fold, chunk.iter().collect()));
        }
        rows.push((
            "aggregate".to_string(),
            outcome.aggregates.iter().collect(),
        ));
        rows
    };
    for (fold, reports) in rows {
        let by = |v: Variant| -> &EvalReport {
            reports
                .iter()
                .find(|r| r.variant == v)
                .expect("every variant present per fold")
        };
        let sendal = by(Variant::Sendal);
        let _ = writeln!(
            out,
            "{fold},{},{},{},{}",
            sendal.linear_fraction,
            variant_cells(sendal),
            variant_cells(by(Variant::LinearOnly)),
            variant_cells(by(Variant::ComponentOnly)),
        );
    }
    out
}

/// Human-readable aggregate table for standard output.
pub fn summary_table(outcome: &WalkForwardOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>10} {:>8} {:>8} {:>8} {:>8} {:>12} {:>10}",
        "variant", "rmse", "miss@3", "miss@5", "miss@10", "miss@30", "mean_macs", "lin_frac"
    );
    for report in &outcome.aggregates {
        let _ = writeln!(
            out,
            "{:<16} {:>10.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>12.1} {:>10.4}",
            report.variant.to_string(),
            report.rmse,
            report.miss_ratios[0].1,
            report.miss_ratios[1].1,
            report.miss_ratios[2].1,
            report.miss_ratios[3].1,
            report.mean_macs,
            report.linear_fraction,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_known_values() {
        assert_eq!(rmse(&[1.0f64, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = rmse(&[1.0f64, 2.0], &[1.0, 4.0]).unwrap();
        assert!((v - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rmse_scales_homogeneously() {
        let pred = [1.0f64, 3.0, -2.0];
        let truth = [0.5f64, 2.0, 1.0];
        let base = rmse(&pred, &truth).unwrap();
        let scaled_pred: Vec<f64> = pred.iter().map(|v| v * -3.0).collect();
        let scaled_truth: Vec<f64> = truth.iter().map(|v| v * -3.0).collect();
        let scaled = rmse(&scaled_pred, &scaled_truth).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-12);
    }

    #[test]
    fn rmse_zero_iff_equal() {
        let pred = [1.0f64, 2.0, 3.0];
        let mut truth = pred;
        assert_eq!(rmse(&pred, &truth).unwrap(), 0.0);
        truth[1] += 1e-9;
        assert!(rmse(&pred, &truth).unwrap() > 0.0);
    }

    #[test]
    fn miss_ratio_count_arithmetic() {
        // Errors 1, 4, 6 against threshold 5: one miss out of three.
        let pred = [1.0f64, 4.0, 6.0];
        let truth = [0.0f64, 0.0, 0.0];
        assert!((miss_ratio(&pred, &truth, 5.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(miss_ratio(&pred, &truth, 1e12).unwrap(), 0.0);
    }

    #[test]
    fn miss_ratio_non_increasing_in_threshold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pred: Vec<f64> = (0..300).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let truth: Vec<f64> = (0..300).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let mut prev = 1.0;
        for t in MISS_THRESHOLDS {
            let r = miss_ratio(&pred, &truth, t).unwrap();
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn metrics_reject_empty_input() {
        assert!(rmse::<f64>(&[], &[]).is_err());
        assert!(miss_ratio::<f64>(&[], &[], 3.0).is_err());
        assert!(rmse(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn anchored_plan_geometry() {
        let plan = plan_anchored(1100, 10, 20).unwrap();
        assert_eq!(plan.segment_len, 100);
        assert_eq!(plan.folds.len(), 10);
        for fold in &plan.folds {
            assert_eq!(fold.train_end, fold.test_start);
            assert_eq!(fold.test_end - fold.test_start, plan.segment_len);
            // Anchoring: every test index strictly follows all train indices.
            assert!(fold.train_end <= fold.test_start);
        }
        assert_eq!(plan.folds[0].train_end, 100);
        assert_eq!(plan.folds[9].test_end, 1100);
    }

    #[test]
    fn anchored_plan_rejects_short_data() {
        assert!(plan_anchored(200, 10, 20).is_err());
    }

    #[test]
    fn fold_seeds_differ() {
        let seeds: Vec<u64> = (1..=10).map(|k| fold_seed(42, k)).collect();
        let mut dedup = seeds.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), seeds.len());
    }

    #[test]
    fn walk_forward_structure_and_aggregates() {
        use crate::series::RefinedSeries;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let ds = SensorPairDataset::new(
            RefinedSeries::new(0, 15.0, xs).unwrap(),
            RefinedSeries::new(0, 15.0, ys).unwrap(),
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs_phase1: 4,
            epochs_phase2: 4,
            epochs_phase3: 2,
            ..TrainConfig::default()
        };
        let outcome = anchored_walk_forward(&ds, &cfg, CoreKind::Gru, 3, false).unwrap();
        assert_eq!(outcome.folds.len(), 9);
        assert_eq!(outcome.aggregates.len(), 3);
        assert_eq!(outcome.predictions.len(), 3);

        // Aggregate rmse is the arithmetic mean of the per-fold rmses.
        for variant in [Variant::Sendal, Variant::LinearOnly, Variant::ComponentOnly] {
            let fold_mean = mean(
                outcome
                    .folds
                    .iter()
                    .filter(|r| r.variant == variant)
                    .map(|r| r.rmse),
            );
            assert!((outcome.aggregate(variant).rmse - fold_mean).abs() <= 1e-12);
        }

        // Leakage: every test index strictly follows the fold's train range.
        for (spec, preds) in outcome.plan.folds.iter().zip(outcome.predictions.iter()) {
            assert!(preds.target_indices.iter().all(|i| *i >= spec.train_end));
        }

        // Fractions partition exactly.
        for report in &outcome.folds {
            assert_eq!(report.linear_fraction + report.component_fraction(), 1.0);
        }

        // CSV: one row per fold plus the aggregate row.
        let csv = reports_to_csv(&outcome, &["config: test".to_string()]);
        let data_rows = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("fold,"))
            .count();
        assert_eq!(data_rows, 4);
        assert!(csv.lines().any(|l| l.starts_with("aggregate,")));
    }

    #[test]
    fn latency_bench_enforces_sample_floor_and_count() {
        use crate::model::{CoreKind, ModelDims, SendalModel};
        let model = SendalModel::<f64>::init(CoreKind::Lstm, &ModelDims::default(), 0.5, 1, 1)
            .unwrap()
            .cast::<f32>();
        let windows: Vec<Vec<f32>> = (0..50)
            .map(|i| (0..20).map(|j| ((i + j) % 7) as f32).collect())
            .collect();
        assert!(latency_bench(&model, &windows, 2, BenchMode::TopDown).is_err());
        let stats = latency_bench(&model, &windows, 20, BenchMode::LinearOnly).unwrap();
        assert_eq!(stats.count, 1000);
        assert!(stats.median_us > 0.0);
        assert!(stats.p95_us >= stats.median_us);
    }
}
