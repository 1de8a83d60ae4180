use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use pakd_core::analysis::{
    bucket_analysis, buckets_to_csv, deltas_to_csv, denoising_curve, disparity_experiment, line_chart_svg,
    sft_comparison, size_rows_to_csv, size_sweep, with_predictions, Series,
};
use pakd_core::distill::{fit, reports_to_csv, run_pipeline, score_against, DistillData, LabelSource};
use pakd_core::experiment::{run_bench, AnalysisKind, Pools, RunConfig};
use pakd_core::teachersim::AnnotatedExample;
use pakd_core::{StudentModel, TrainConfig};

use crate::files::{self, comment_header, json_document, svg_document, write_text, LABELED, TEST, TRAIN, UNLABELED};
use crate::{config_error, Failure, Format};

pub fn gen(config: &RunConfig) -> Result<(), Failure> {
    let pools = pakd_core::experiment::sample_pools(&config.grammar, &config.corpus, config.seed)?;
    for (name, pool) in [(LABELED, &pools.labeled), (UNLABELED, &pools.unlabeled), (TEST, &pools.test)] {
        let path = files::write_pool(config, name, pool)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn read_pools(config: &RunConfig) -> Result<Pools, Failure> {
    Ok(Pools {
        labeled: files::read_pool(config, LABELED)?,
        unlabeled: files::read_pool(config, UNLABELED)?,
        test: files::read_pool(config, TEST)?,
    })
}

pub fn annotate(config: &RunConfig) -> Result<(), Failure> {
    let pools = read_pools(config)?;
    let train = config.annotate(&pools, config.seed)?;
    if train.iter().all(|e| e.gold.is_some()) {
        let labels: Vec<_> = train.iter().map(|e| e.teacher.clone().expect("annotated")).collect();
        let f1 = score_against(&labels, &train, LabelSource::Gold)?;
        info!("teacher labels score {:.2} F1 against gold", f1 * 100.0);
    }
    let path = files::write_pool(config, TRAIN, &train)?;
    println!("{}", path.display());
    Ok(())
}

struct Inputs {
    train: Vec<AnnotatedExample>,
    labeled: Vec<AnnotatedExample>,
    test: Vec<AnnotatedExample>,
}

impl Inputs {
    fn read(config: &RunConfig) -> Result<Self, Failure> {
        Ok(Inputs {
            train: files::read_pool(config, TRAIN)?,
            labeled: files::read_pool(config, LABELED)?,
            test: files::read_pool(config, TEST)?,
        })
    }

    fn data(&self) -> DistillData<'_> {
        DistillData {
            train: &self.train,
            labeled: &self.labeled,
            test: &self.test,
        }
    }
}

fn output_dir(config: &RunConfig, sub: &str) -> PathBuf {
    Path::new(&config.out).join(sub)
}

fn no_svg(what: &str) -> Failure {
    config_error(anyhow!("{what} has no chart form; use --format csv or json"))
}

pub fn distill(config: &RunConfig, format: Format) -> Result<(), Failure> {
    if format == Format::Svg {
        return Err(no_svg("a pipeline report"));
    }
    let inputs = Inputs::read(config)?;
    let kind = config.pipeline.kind;
    let (model, report) = run_pipeline(inputs.data(), &config.pipeline).with_context(|| format!("pipeline {kind}"))?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let stem = format!("{kind}-seed{}", config.seed);
    let dir = output_dir(config, "distill");
    write_text(&dir.join(format!("{stem}.model")), &(comment_header(config) + &model.to_text()))?;
    let body = match format {
        Format::Json => json_document(config, &report),
        _ => comment_header(config) + &reports_to_csv(std::slice::from_ref(&report)),
    };
    write_text(&dir.join(format!("{stem}.{}", format.extension())), &body)?;
    if let Some(f1) = report.test_f1 {
        println!("{kind} test F1 {:.2}", f1 * 100.0);
    }
    Ok(())
}

/// Loads a model saved by `distill`, checking it was trained on this data.
fn load_model(config: &RunConfig, path: &Path) -> Result<StudentModel, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let found = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# data_hash="))
        .ok_or_else(|| config_error(anyhow!("{} has no data_hash line", path.display())))?;
    files::check_hash(path, found, &config.data_hash())?;
    StudentModel::from_text(&text)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(Failure::Runtime)
}

/// The student whose predictions the bucket and delta analyses inspect: the
/// given model, or a short run on the teacher labels.
fn student(config: &RunConfig, inputs: &Inputs, model: Option<&Path>) -> Result<StudentModel, Failure> {
    if let Some(path) = model {
        return load_model(config, path);
    }
    let cfg = TrainConfig {
        epochs: config.pipeline.s0_epochs,
        seed: config.seed,
        ..TrainConfig::default()
    };
    Ok(fit(&inputs.train, LabelSource::Teacher, &[], &cfg, |_, _| {})?.0)
}

fn series(name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Series {
    Series {
        name: name.to_string(),
        points: points.into_iter().collect(),
    }
}

/// One analysis rendered in every format the command accepts.
struct Rendered {
    csv: String,
    json: String,
    svg: Option<String>,
}

fn loaded<'a>(config: &RunConfig, slot: &'a mut Option<Inputs>) -> Result<&'a Inputs, Failure> {
    if slot.is_none() {
        *slot = Some(Inputs::read(config)?);
    }
    Ok(slot.as_ref().expect("just filled"))
}

fn render_one(
    config: &RunConfig,
    kind: AnalysisKind,
    inputs: &mut Option<Inputs>,
    model: Option<&Path>,
) -> Result<Rendered, Failure> {
    let seed = config.seed;
    let a = &config.analysis;
    Ok(match kind {
        AnalysisKind::Buckets => {
            let inputs = loaded(config, inputs)?;
            let s0 = student(config, inputs, model)?;
            let rows = bucket_analysis(&with_predictions(&s0, &inputs.train), a.buckets)?;
            let svg = line_chart_svg(
                "Teacher label quality by convergence bucket",
                "bucket (0 = most converged)",
                "F1",
                &[
                    series("teacher gold F1", rows.iter().filter_map(|r| Some((r.bucket as f64, r.mean_teacher_gold_f1?)))),
                    series("convergence", rows.iter().map(|r| (r.bucket as f64, r.mean_convergence))),
                ],
            );
            Rendered {
                csv: buckets_to_csv(&rows),
                json: json_document(config, &rows),
                svg: Some(svg),
            }
        }
        AnalysisKind::Delta => {
            let inputs = loaded(config, inputs)?;
            if model.is_some() {
                let s = student(config, inputs, model)?;
                let scored = with_predictions(&s, &inputs.train);
                let csv = deltas_to_csv(&scored)?;
                let deltas: Vec<f64> = scored.iter().map(pakd_core::analysis::delta).collect::<Result<_, _>>()?;
                Rendered {
                    csv,
                    json: json_document(config, &deltas),
                    svg: None,
                }
            } else {
                let curve = denoising_curve(&inputs.train, a.epochs, seed)?;
                let mut csv = String::from("epoch,pct_student_better,mean_delta\n");
                for c in &curve {
                    csv.push_str(&format!("{},{:.6},{:.6}\n", c.epoch, c.pct_student_better, c.mean_delta));
                }
                let mut lines = vec![series(
                    "all",
                    curve.iter().map(|c| (c.epoch as f64, c.pct_student_better * 100.0)),
                )];
                let tiers: Vec<usize> = curve.first().map(|c| c.by_tier.iter().map(|t| t.0).collect()).unwrap_or_default();
                for (i, tier) in tiers.iter().enumerate() {
                    lines.push(series(
                        &format!("tier {tier}"),
                        curve.iter().map(|c| (c.epoch as f64, c.by_tier[i].1 * 100.0)),
                    ));
                }
                Rendered {
                    csv,
                    json: json_document(config, &curve),
                    svg: Some(line_chart_svg("Student beats teacher", "epoch", "% of sentences", &lines)),
                }
            }
        }
        AnalysisKind::Disparity => {
            let curve = disparity_experiment(&loaded(config, inputs)?.train, a.epochs, seed)?;
            let at = |v: &[f64]| -> Vec<(f64, f64)> { curve.epochs.iter().zip(v).map(|(&e, &y)| (e as f64, y)).collect() };
            let svg = line_chart_svg(
                "Convergence to teacher labels",
                "epoch",
                "F1 to teacher label",
                &[series("clean half", at(&curve.high)), series("noisy half", at(&curve.low))],
            );
            Rendered {
                csv: curve.to_csv(),
                json: json_document(config, &curve),
                svg: Some(svg),
            }
        }
        AnalysisKind::SizeSweep => {
            let rows = size_sweep(&config.grammar, &a.sizes, &config.noise, &config.corpus, a.epochs, seed)?;
            let svg = line_chart_svg(
                "Denoising by distillation-set size",
                "sentences",
                "% student better (mean over epochs)",
                &[series(
                    "student better",
                    rows.iter().map(|r| (r.size as f64, r.mean_pct_student_better * 100.0)),
                )],
            );
            Rendered {
                csv: size_rows_to_csv(&rows),
                json: json_document(config, &rows),
                svg: Some(svg),
            }
        }
        AnalysisKind::SftSweep => {
            let table = sft_comparison(&config.grammar, &config.corpus, &a.labeled_sizes, a.pakd_labeled, &config.pipeline)?;
            let svg = line_chart_svg(
                "Supervised training against PA-KD",
                "gold examples",
                "test F1",
                &[
                    series("supervised", table.rows.iter().map(|r| (r.labeled as f64, r.sft_f1 * 100.0))),
                    series(
                        &format!("PA-KD from {} gold", table.pakd_labeled),
                        table.rows.iter().map(|r| (r.labeled as f64, table.pakd_f1 * 100.0)),
                    ),
                ],
            );
            Rendered {
                csv: table.to_csv(),
                json: json_document(config, &table),
                svg: Some(svg),
            }
        }
    })
}

pub fn analyze(config: &RunConfig, selected: &[AnalysisKind], model: Option<&Path>, format: Format) -> Result<(), Failure> {
    let kinds = if selected.is_empty() { &config.analysis.select[..] } else { selected };
    if kinds.is_empty() {
        return Err(config_error(anyhow!("no analysis selected")));
    }
    let dir = output_dir(config, "analysis");
    let mut inputs = None;
    for &kind in kinds {
        info!("running {}", kind.name());
        let r = render_one(config, kind, &mut inputs, model).with_context_failure(kind)?;
        let body = match format {
            Format::Csv => comment_header(config) + &r.csv,
            Format::Json => r.json,
            Format::Svg => svg_document(config, &r.svg.ok_or_else(|| no_svg("per-sentence deltas"))?),
        };
        write_text(&dir.join(format!("{}-seed{}.{}", kind.name(), config.seed, format.extension())), &body)?;
    }
    Ok(())
}

trait FailureContext<T> {
    fn with_context_failure(self, kind: AnalysisKind) -> Result<T, Failure>;
}

impl<T> FailureContext<T> for Result<T, Failure> {
    fn with_context_failure(self, kind: AnalysisKind) -> Result<T, Failure> {
        self.map_err(|f| match f {
            Failure::Runtime(e) => Failure::Runtime(e.context(format!("analysis {}", kind.name()))),
            config => config,
        })
    }
}

pub fn bench(config: &RunConfig, format: Format) -> Result<(), Failure> {
    if format == Format::Svg {
        return Err(no_svg("the bench report"));
    }
    let report = run_bench(config)?;
    let body = match format {
        Format::Json => report.to_json() + "\n",
        _ => report.to_csv(),
    };
    write_text(&Path::new(&config.out).join(format!("bench.{}", format.extension())), &body)?;
    print!("{}", report.to_markdown());
    Ok(())
}
