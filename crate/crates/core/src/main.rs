use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use topolens::config::Config;
use topolens::explain::{grad_cam_input, ImportanceField};
use topolens::filtration::{sublevel_pd0_with, Connectivity, SublevelOptions};
use topolens::io::{self, DatasetManifest, InputKind, SynthSpec};
use topolens::metrics::{betti_curve, wasserstein};
use topolens::model::{grad_check_suite, ClassifyMode, GradCheckSuite, ModelParams};
use topolens::pipeline::{self, EvalWeight, LabeledDiagrams};
use topolens::vectorize::{persistence_image_channels, Extents, PersistenceImageSpec, Weight};
use topolens::viz::{self, FieldRender};
use topolens::{Error, PersistenceDiagram, Result};

#[derive(Parser)]
#[command(name = "topolens", version, about = "Learned importance of topological features")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "TOPOLENS_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML configuration files, applied in order.
    #[arg(long = "config", global = true)]
    configs: Vec<PathBuf>,
    /// Configuration override, e.g. `train.epochs=10`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct InputOpts {
    /// Pixel adjacency for grid inputs.
    #[arg(long, default_value = "4")]
    connectivity: Connectivity,
}

#[derive(Args, Clone)]
struct RenderOpts {
    /// Output size as WxH.
    #[arg(long, default_value = "400x400", value_parser = parse_size)]
    size: (usize, usize),
    /// Output image (.png, or .ppm).
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ClassOpts {
    /// Class to explain, by name (default: the predicted class).
    #[arg(long)]
    class: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Persistence diagram of a grid image (sublevel 0D) or graph (extended).
    ComputePd {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        input_opts: InputOpts,
        /// Keep zero-persistence pairs.
        #[arg(long)]
        keep_zero: bool,
    },
    /// Persistence image of a diagram (or grid/graph) as a tensor file.
    Vectorize {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Resolution, N or WxH.
        #[arg(long, default_value = "40x40", value_parser = parse_size)]
        res: (usize, usize),
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value = "uniform", value_parser = parse_weight)]
        weight: Weight,
        /// `auto` (bounding box + 3 sigma) or b0,b1,p0,p1.
        #[arg(long, default_value = "auto")]
        extents: String,
        /// Two channels: upward pairs, then extended and relative pairs.
        #[arg(long)]
        split_extended: bool,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// p-Wasserstein distance between two diagrams.
    Distance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Drop essential (infinite) points instead of failing.
        #[arg(long)]
        drop_essential: bool,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Betti curve of one homology dimension as CSV.
    Betti {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        dim: u8,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        /// t_min,t_max (default: finite range of the diagram).
        #[arg(long)]
        range: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Generate a synthetic labeled diagram set with a manifest.
    Synth {
        /// `default` (two anchors) or `shared-anchor`.
        #[arg(long, default_value = "default")]
        name: String,
        #[arg(long)]
        per_class: Option<usize>,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train the metric model on a manifest's training split.
    Train {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Train on every entry instead of the training split.
        #[arg(long)]
        all: bool,
        /// Write the per-epoch loss history as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Predict class labels.
    Classify {
        #[arg(long)]
        model: PathBuf,
        inputs: Vec<PathBuf>,
        /// `prototype` or `knn:K`.
        #[arg(long, default_value = "prototype")]
        mode: ClassifyMode,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Grad-CAM importance field for one input.
    Explain {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        class: ClassOpts,
        /// Field as a tensor file.
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the field as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Heatmap of an importance field with the diagonal and contours.
    RenderField {
        #[arg(long)]
        model: PathBuf,
        /// Field tensor written by `explain`; otherwise computed from INPUT.
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        field: Option<PathBuf>,
        input: Option<PathBuf>,
        #[command(flatten)]
        class: ClassOpts,
        #[command(flatten)]
        render: RenderOpts,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Importance field with the input's diagram drawn on top.
    RenderOverlay {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        #[command(flatten)]
        class: ClassOpts,
        #[command(flatten)]
        render: RenderOpts,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Grid image with 0D feature regions tinted by importance.
    RenderInimage {
        #[arg(long)]
        model: PathBuf,
        grid: PathBuf,
        #[command(flatten)]
        class: ClassOpts,
        /// Output pixels per grid cell.
        #[arg(long, default_value_t = 8)]
        scale: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        input_opts: InputOpts,
    },
    /// Compare analytic gradients with central finite differences.
    GradCheck {
        /// Number of random seeds.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Entries checked per parameter tensor.
        #[arg(long, default_value_t = 12)]
        per_tensor: usize,
    },
    /// Split, train (or run a fixed-weight 1-NN baseline), report accuracy.
    Eval {
        /// Named synthetic set (`default`, `shared-anchor`).
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        synth: Option<String>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "learned")]
        weight: EvalWeight,
        #[arg(long, default_value = "prototype")]
        mode: ClassifyMode,
        /// Save the trained model.
        #[arg(long)]
        save_model: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
    },
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).unwrap_or((s, s));
    let w: usize = w.trim().parse().map_err(|_| format!("bad size '{s}'"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad size '{s}'"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn parse_weight(s: &str) -> std::result::Result<Weight, String> {
    match s {
        "uniform" => Ok(Weight::Uniform),
        "persistence" => Ok(Weight::Persistence),
        other => Err(format!("unknown weight '{other}' (expected uniform or persistence)")),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
    match nums[..] {
        [a, b] if parts.len() == 2 && a < b => Ok((a, b)),
        _ => Err(Error::invalid(format!("bad range '{s}', expected t_min,t_max with t_min < t_max"))),
    }
}

fn load_diagram_input(path: &Path, opts: &InputOpts) -> Result<PersistenceDiagram> {
    io::load_input(path, opts.connectivity)
}

fn class_index(model: &ModelParams, class: &Option<String>, predicted: impl FnOnce() -> Result<usize>) -> Result<usize> {
    match class {
        Some(name) => model
            .classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::invalid(format!("unknown class '{name}' (model classes: {})", model.classes.join(", ")))),
        None => predicted(),
    }
}

fn field_for(model: &ModelParams, d: &PersistenceDiagram, class: &ClassOpts) -> Result<ImportanceField> {
    let x = model.input_for(d)?;
    let k = class_index(model, &class.class, || {
        model.classify_embedding(&model.embed_input(&x)?, ClassifyMode::Prototype)
    })?;
    info!("explaining class '{}'", model.classes[k]);
    grad_cam_input(model, &x, k)
}

fn render_opts(model: &ModelParams, r: &RenderOpts) -> FieldRender {
    FieldRender {
        width: r.size.0,
        height: r.size.1,
        mirror: model.split_extended,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes())
}

fn labeled_from_manifest(m: &DatasetManifest, opts: &InputOpts) -> Result<LabeledDiagrams> {
    Ok(LabeledDiagrams {
        diagrams: m.load_diagrams(opts.connectivity)?,
        labels: m.labels(),
        classes: m.classes(),
    })
}

fn run(cli: Cli) -> Result<()> {
    let files: Vec<&Path> = cli.configs.iter().map(PathBuf::as_path).collect();
    let mut overrides = vec![format!("train.seed={}", cli.seed)];
    overrides.extend(cli.overrides.iter().cloned());
    let config = Config::layered(&files, &overrides)?;
    info!("effective configuration:\n{}", config.echo());

    match cli.command {
        Command::ComputePd {
            input,
            out,
            input_opts,
            keep_zero,
        } => {
            let d = match InputKind::of_path(&input)? {
                InputKind::Grid => {
                    let grid = io::load_grid(&input)?;
                    let opts = SublevelOptions {
                        connectivity: input_opts.connectivity,
                        keep_zero,
                    };
                    sublevel_pd0_with(&grid, opts)?.0
                }
                InputKind::Graph => topolens::filtration::extended_pd_graph_with(&io::load_graph(&input)?, keep_zero)?,
                InputKind::Diagram => return Err(Error::invalid("compute-pd takes a grid image or a graph")),
            };
            io::save_diagram(&out, &d)?;
            info!("{} points written to {}", d.points.len(), out.display());
        }
        Command::Vectorize {
            input,
            out,
            res,
            sigma,
            weight,
            extents,
            split_extended,
            input_opts,
        } => {
            let d = load_diagram_input(&input, &input_opts)?;
            let extents = if extents == "auto" {
                Extents::bounding([&d], 3.0 * sigma)?
            } else {
                extents.parse::<Extents>().map_err(Error::invalid)?
            };
            let spec = PersistenceImageSpec::new(res.0, res.1, extents, sigma, weight)?;
            let images = persistence_image_channels(&d, &spec, split_extended)?;
            let data = images.iter().flat_map(|im| im.pixels.iter().copied()).collect();
            let t = topolens::neural::Tensor::new(vec![images.len(), res.1, res.0], data)?;
            io::save_tensor(&out, &t)?;
        }
        Command::Distance {
            a,
            b,
            p,
            drop_essential,
            input_opts,
        } => {
            let mut da = load_diagram_input(&a, &input_opts)?;
            let mut db = load_diagram_input(&b, &input_opts)?;
            if drop_essential {
                da = da.without_essential();
                db = db.without_essential();
            }
            let m = wasserstein(&da, &db, p)?;
            println!("{:.9}", m.cost);
        }
        Command::Betti {
            input,
            dim,
            samples,
            range,
            out,
            input_opts,
        } => {
            let d = load_diagram_input(&input, &input_opts)?;
            let (t0, t1) = match range {
                Some(r) => parse_range(&r)?,
                None => {
                    let vals: Vec<f64> = d
                        .points
                        .iter()
                        .flat_map(|p| [p.birth, p.death])
                        .filter(|v| v.is_finite())
                        .collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if !(lo < hi) {
                        return Err(Error::invalid("diagram has no finite range; pass --range"));
                    }
                    (lo, hi)
                }
            };
            let curve = betti_curve(&d, dim, samples, t0, t1)?;
            let mut text = String::from("t,betti\n");
            for (t, c) in curve.positions().iter().zip(&curve.samples) {
                text.push_str(&format!("{t},{c}\n"));
            }
            match out {
                Some(path) => write_text(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Synth { name, per_class, out } => {
            let mut spec = SynthSpec::named(&name, cli.seed)?;
            if let Some(n) = per_class {
                spec.per_class = n;
            }
            let data = io::synth_generate(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut entries = Vec::new();
            for (d, &l) in data.diagrams.iter().zip(&data.labels) {
                let name = PathBuf::from(format!("{}.csv", d.source_id.replace('/', "_")));
                io::save_diagram(&out.join(&name), d)?;
                entries.push(io::ManifestEntry {
                    path: name,
                    label: data.classes[l].clone(),
                });
            }
            let manifest = DatasetManifest {
                entries,
                split_seed: cli.seed,
                test_fraction: config.train.test_fraction,
            };
            manifest.save(&out.join("manifest.json"))?;
            write_text(
                &out.join("synth.json"),
                &(serde_json::to_string_pretty(&spec).map_err(|e| Error::Internal(e.to_string()))? + "\n"),
            )?;
            println!("{} diagrams in {}", data.diagrams.len(), out.display());
        }
        Command::Train {
            manifest,
            out,
            all,
            history,
            input_opts,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let data = labeled_from_manifest(&m, &input_opts)?;
            let train_set = if all {
                data.clone()
            } else {
                let (train_idx, _) = io::split(&data.labels, m.test_fraction, m.split_seed)?;
                data.subset(&train_idx)
            };
            let (model, hist) = pipeline::fit(&train_set, &config.arch, &config.train, &config.image)?;
            io::save_model(&out, &model)?;
            if let Some(path) = history {
                write_text(
                    &path,
                    &(serde_json::to_string_pretty(&hist).map_err(|e| Error::Internal(e.to_string()))? + "\n"),
                )?;
            }
            println!(
                "trained on {} diagrams, {} epochs, final loss {:.6}",
                train_set.diagrams.len(),
                hist.hinge.len(),
                hist.hinge.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Classify {
            model,
            inputs,
            mode,
            input_opts,
        } => {
            let model = io::load_model(&model)?;
            println!("input,label,{}", model.classes.iter().map(|c| format!("p_{c}")).collect::<Vec<_>>().join(","));
            for input in inputs {
                let d = load_diagram_input(&input, &input_opts)?;
                let e = model.embed_input(&model.input_for(&d)?)?;
                let label = model.classify_embedding(&e, mode)?;
                let probs = model.scores_of_embedding(&e)?;
                let probs: Vec<String> = probs.iter().map(|p| format!("{p:.6}")).collect();
                println!("{},{},{}", input.display(), model.classes[label], probs.join(","));
            }
        }
        Command::Explain {
            model,
            input,
            class,
            out,
            csv,
            input_opts,
        } => {
            let model = io::load_model(&model)?;
            let d = load_diagram_input(&input, &input_opts)?;
            let field = field_for(&model, &d, &class)?;
            io::save_tensor(&out, &field.to_tensor())?;
            if let Some(path) = csv {
                write_text(&path, &io::field_to_csv(&field))?;
            }
            let (r, c) = field.argmax();
            let (b, p) = field.spec.pixel_center(r, c);
            println!(
                "class {} max {:.6e} at birth {b:.6} persistence {p:.6}",
                model.classes[field.class_label],
                field.max()
            );
        }
        Command::RenderField {
            model,
            field,
            input,
            class,
            render,
            input_opts,
        } => {
            let model = io::load_model(&model)?;
            let f = match (field, input) {
                (Some(path), _) => ImportanceField::from_tensor(&io::load_tensor(&path)?, &model.image_spec)?,
                (None, Some(input)) => field_for(&model, &load_diagram_input(&input, &input_opts)?, &class)?,
                (None, None) => return Err(Error::invalid("pass --field or an input")),
            };
            viz::render_field(&f, render_opts(&model, &render))?.save(&render.out)?;
        }
        Command::RenderOverlay {
            model,
            input,
            class,
            render,
            input_opts,
        } => {
            let model = io::load_model(&model)?;
            let d = load_diagram_input(&input, &input_opts)?;
            let f = field_for(&model, &d, &class)?;
            viz::render_diagram_overlay(&d, &f, render_opts(&model, &render))?.save(&render.out)?;
        }
        Command::RenderInimage {
            model,
            grid,
            class,
            scale,
            out,
            input_opts,
        } => {
            let model = io::load_model(&model)?;
            let g = io::load_grid(&grid)?;
            let (d, history) = sublevel_pd0_with(
                &g,
                SublevelOptions {
                    connectivity: input_opts.connectivity,
                    keep_zero: false,
                },
            )?;
            let f = field_for(&model, &d, &class)?;
            viz::render_inimage(&g, &d, &history, &f, scale)?.save(&out)?;
        }
        Command::GradCheck {
            seeds,
            h,
            tol,
            per_tensor,
        } => {
            let suite = GradCheckSuite {
                seeds: (cli.seed..cli.seed + seeds).collect(),
                h,
                per_tensor,
            };
            let report = grad_check_suite(&suite)?;
            print!("{}", report.table());
            let worst = report.max_rel_error();
            println!("max relative error {worst:.3e} (tolerance {tol:.1e})");
            if !(worst <= tol) {
                return Err(Error::Internal(format!("gradient check failed: {worst:.3e} > {tol:.1e}")));
            }
        }
        Command::Eval {
            synth,
            manifest,
            weight,
            mode,
            save_model,
            input_opts,
        } => {
            let data = match (synth, manifest) {
                (Some(name), _) => {
                    let s = io::synth_generate(&SynthSpec::named(&name, cli.seed)?)?;
                    LabeledDiagrams {
                        diagrams: s.diagrams,
                        labels: s.labels,
                        classes: s.classes,
                    }
                }
                (None, Some(path)) => labeled_from_manifest(&DatasetManifest::load(&path)?, &input_opts)?,
                (None, None) => return Err(Error::invalid("pass --synth or --manifest")),
            };
            let (report, model) = pipeline::evaluate(&data, weight, &config.arch, &config.train, &config.image, mode)?;
            if let (Some(path), Some(model)) = (save_model, model) {
                io::save_model(&path, &model)?;
            }
            println!("accuracy {:.2}", report.accuracy);
            println!(
                "{}",
                serde_json::to_string(&report).map_err(|e| Error::Internal(e.to_string()))?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
