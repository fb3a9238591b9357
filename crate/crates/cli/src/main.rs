use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gestalt_core::gestalt::{closure_fill, combine_layers, entity_flags, layer_maps, TowerInputs, LAYER_NAMES};
use gestalt_core::harness::{
    ablation_from_checkpoints, answer_vocabulary, evaluate_checkpoint, generate_scene, make_item, run_ablation,
    scene_seed, segment_scene, text_vocabulary, DataItem, Family, SceneGraph, Split, SyntheticScene, TrainConfig,
};
use gestalt_core::model::{intervene, intervention_heatmap, load_model, InterventionSpec, Model, Variant};
use gestalt_core::region::{segment_slic, write_heat_pgm, write_label_pgm, Image, RegionGraph};
use gestalt_core::text::{CausalText, TriggerLexicon};
use gestalt_core::{Error, Result};

/// Gestalt-grouped visual question answering on synthetic scenes.
#[derive(Parser, Debug)]
#[command(name = "gestalt-vqa", version)]
struct Cli {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    GroundTruth,
    Slic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a generated scene (or a PPM image) into a region graph.
    Segment {
        #[arg(long, default_value = "locate")]
        family: String,
        #[arg(long)]
        scene_seed: Option<u64>,
        #[arg(long, value_enum, default_value = "ground-truth")]
        method: Method,
        /// Segment this image with superpixels instead of generating a scene.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Layer maps and combined grouping prior, for an evaluation item or an image.
    Gestalt {
        #[arg(long, default_value = "containment")]
        family: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Segment this PPM/PGM with superpixels instead of generating a scene.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Query region of `--image`.
        #[arg(long, default_value_t = 0)]
        query: usize,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        hops: Option<usize>,
        #[arg(long)]
        k_clusters: Option<usize>,
        #[arg(long)]
        bridge_gap: Option<f64>,
        #[arg(long)]
        decay: Option<f64>,
        /// Four gate logits: proximity, similarity, closure, continuity.
        #[arg(long, value_delimiter = ',')]
        gate: Option<Vec<f64>>,
    },
    /// Tokenize a question and mark its causal triggers.
    EncodeText {
        #[arg(long)]
        text: String,
        /// Do not wrap the text in the intent tags.
        #[arg(long)]
        no_wrap: bool,
        /// Trigger lexicon: one word per line, `phrase<TAB>role` for dictionary entries.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Train a model and write checkpoint, metrics and eval table.
    Train,
    /// Score a checkpoint on the evaluation split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train (or load) several variants over several seeds and compare them.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "gestalt_tower,dot_product_attention")]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Families pooled in the comparison; all configured ones by default.
        #[arg(long, value_delimiter = ',')]
        families: Vec<String>,
        /// Score checkpoints written by an earlier run instead of training.
        #[arg(long)]
        from_checkpoints: Option<PathBuf>,
    },
    /// Apply a counterfactual edit and report how the answer moves.
    Intervene {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `none`, `mask_text_token:<i>` or `delete_region:<r>`.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "containment")]
        family: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli, fallback: Option<&Path>) -> Result<TrainConfig> {
    let mut cfg = match (&cli.config, fallback) {
        (Some(p), _) => TrainConfig::load(p)?,
        (None, Some(p)) if p.exists() => TrainConfig::load(p)?,
        _ => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `config.toml` saved by `train` next to a checkpoint.
fn sibling_config(checkpoint: &Path) -> Option<PathBuf> {
    checkpoint.parent().map(|d| d.join("config.toml"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Segment { family, scene_seed: s, method, image } => {
            let cfg = load_config(cli, None)?;
            fs::create_dir_all(out)?;
            let graph: RegionGraph<f64> = match image {
                Some(path) => {
                    let img = Image::<f64>::read_pnm(BufReader::new(File::open(path)?))?;
                    segment_slic(&img, &cfg.segmentation.slic)?
                }
                None => {
                    let family: Family = family.parse()?;
                    let scene = generate_scene(s.unwrap_or(cfg.seed), family, &cfg.scene)?;
                    scene.canvas.write_pnm(create(&out.join("scene.ppm"))?)?;
                    match method {
                        Method::GroundTruth => segment_scene(&scene, &cfg.segmentation, &cfg.tower)?.graph,
                        Method::Slic => segment_slic(&scene.canvas, &cfg.segmentation.slic)?,
                    }
                }
            };
            write_label_pgm(graph.width(), graph.height(), graph.labels(), create(&out.join("labels.pgm"))?)?;
            fs::write(out.join("graph.txt"), graph.to_text())?;
            println!("{} regions -> {}", graph.len(), out.display());
        }
        Command::Gestalt { family, index, image, query, tau, hops, k_clusters, bridge_gap, decay, gate } => {
            let mut cfg = load_config(cli, None)?;
            let t = &mut cfg.tower;
            t.proximity.tau = tau.unwrap_or(t.proximity.tau);
            t.proximity.hops = hops.or(t.proximity.hops);
            t.k_clusters = k_clusters.or(t.k_clusters);
            t.bridge_gap = bridge_gap.unwrap_or(t.bridge_gap);
            t.decay = decay.unwrap_or(t.decay);
            if let Some(g) = gate {
                cfg.model.gate_init =
                    g.as_slice().try_into().map_err(|_| Error::Config(format!("--gate needs 4 logits, got {}", g.len())))?;
            }
            cfg.validate()?;
            let (graph, maps, answer) = match image {
                Some(path) => {
                    let img = Image::<f64>::read_pnm(BufReader::new(File::open(path)?))?;
                    let graph = segment_slic(&img, &cfg.segmentation.slic)?;
                    let maps = image_layers(&img, &graph, *query, &cfg)?;
                    (graph, maps, None)
                }
                None => {
                    let (_, sg, item) = item_for(&cfg, family.parse()?, *index)?;
                    let r = item.sample.regions();
                    let row = |k: usize| item.sample.layers.data()[k * r..(k + 1) * r].to_vec();
                    println!("{}", item.qa.question);
                    (sg.graph, [row(0), row(1), row(2), row(3)], Some(item.answer_region))
                }
            };
            let prior = combine_layers(&maps, &cfg.model.gate_init)?;
            fs::create_dir_all(out)?;
            let mut csv = format!("region_id,{},combined\n", LAYER_NAMES.join(","));
            for (i, (c, w)) in prior.layer_contrib.iter().zip(&prior.weights).enumerate() {
                csv.push_str(&format!("{i},{:.6},{:.6},{:.6},{:.6},{w:.6}\n", c[0], c[1], c[2], c[3]));
            }
            fs::write(out.join("prior.csv"), csv)?;
            let heat: Vec<f64> = graph.labels().iter().map(|&l| prior.weights[l]).collect();
            write_heat_pgm(graph.width(), graph.height(), &heat, create(&out.join("prior.pgm"))?)?;
            if let Some(a) = answer {
                println!("prior mass on answer region {a}: {:.4}", prior.weights[a]);
            }
            println!("{} regions -> {}", graph.len(), out.display());
        }
        Command::EncodeText { text, no_wrap, lexicon } => {
            let lex = match lexicon {
                Some(p) => TriggerLexicon::load(p)?,
                None => TriggerLexicon::default(),
            };
            let enc = CausalText::encode(text, &lex, &text_vocabulary(), !no_wrap);
            let mut csv = String::from("position,token,id,c_mask,role\n");
            for i in 0..enc.len() {
                csv.push_str(&format!("{i},{},{},{},{}\n", csv_field(&enc.tokens[i]), enc.ids[i], enc.c_mask[i], enc.roles[i]));
            }
            fs::create_dir_all(out)?;
            fs::write(out.join("encoded.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Train => {
            let cfg = load_config(cli, None)?;
            let outcome = gestalt_core::harness::train(&cfg, Some(out))?;
            print!("{}", outcome.eval.to_csv()?);
            println!("overall accuracy {:.4}", outcome.eval.overall());
        }
        Command::Eval { checkpoint } => {
            let cfg = load_config(cli, sibling_config(checkpoint).as_deref())?;
            let table = evaluate_checkpoint(checkpoint, &cfg)?;
            fs::create_dir_all(out)?;
            let csv = table.to_csv()?;
            fs::write(out.join("eval.csv"), &csv)?;
            print!("{csv}");
            println!("overall accuracy {:.4}", table.overall());
        }
        Command::Ablate { variants, seeds, families, from_checkpoints } => {
            let cfg = load_config(cli, None)?;
            let variants: Vec<Variant> = variants.iter().map(|v| v.parse()).collect::<Result<_>>()?;
            let families: Vec<String> = if families.is_empty() {
                cfg.families.iter().map(|f| f.name().to_string()).collect()
            } else {
                families.iter().map(|f| f.parse::<Family>().map(|f| f.name().to_string())).collect::<Result<_>>()?
            };
            let fam: Vec<&str> = families.iter().map(String::as_str).collect();
            let result = match from_checkpoints {
                Some(dir) => ablation_from_checkpoints(&cfg, dir, &variants, seeds)?,
                None => run_ablation(&cfg, &variants, seeds, Some(out))?,
            };
            fs::create_dir_all(out)?;
            fs::write(out.join("ablation.csv"), result.to_csv()?)?;
            fs::write(out.join("deltas.csv"), result.deltas_csv(variants[0])?)?;
            let comparisons = variants[1..].iter().map(|&b| result.compare(variants[0], b, &fam)).collect::<Result<Vec<_>>>()?;
            write_json(&out.join("comparison.json"), &comparisons)?;
            for c in &comparisons {
                println!(
                    "{} vs {}: mean delta {:+.4}, {}+/{}-, sign-test p {:.4}",
                    c.a.name(),
                    c.b.name(),
                    c.mean_delta,
                    c.positives,
                    c.negatives,
                    c.p_value
                );
            }
        }
        Command::Intervene { checkpoint, spec, family, index } => {
            let spec: InterventionSpec = spec.parse()?;
            let cfg = load_config(cli, sibling_config(checkpoint).as_deref())?;
            let family: Family = family.parse()?;
            let model: Model<f64> = load_model(checkpoint)?;
            let (_, sg, item) = item_for(&cfg, family, *index)?;
            let report = intervene(&model, &item.sample, spec)?;
            fs::create_dir_all(out)?;
            write_json(&out.join("report.json"), &report)?;
            let heat = intervention_heatmap(&sg.graph, &report)?;
            write_heat_pgm(sg.graph.width(), sg.graph.height(), &heat, create(&out.join("heatmap.pgm"))?)?;
            println!("{}", item.qa.question);
            println!("baseline: {}", report.baseline_answer);
            println!("intervened: {}", report.intervened_answer);
            println!("flagged tokens: {}", report.flagged.iter().filter(|&&f| f).count());
        }
    }
    Ok(())
}

/// Quotes a CSV field holding a comma or quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Layer maps of an arbitrary image: entity flags from the intensity and
/// variance thresholds, no text guidance.
fn image_layers(img: &Image<f64>, graph: &RegionGraph<f64>, query: usize, cfg: &TrainConfig) -> Result<[Vec<f64>; 4]> {
    let t = &cfg.tower;
    let fill = closure_fill(img, t);
    let entity = entity_flags(graph, t.entity_intensity, t.entity_variance);
    let q = graph.region(query)?;
    let inputs = TowerInputs { graph, closure_fill: &fill, entity: &entity };
    layer_maps(&inputs, query, &q.feature, None, t)
}

fn item_for(cfg: &TrainConfig, family: Family, index: usize) -> Result<(SyntheticScene, SceneGraph, DataItem)> {
    let seed = scene_seed(cfg.seed, Split::Eval, index);
    make_item(seed, family, &cfg.scene, cfg, &TriggerLexicon::default(), &text_vocabulary(), &answer_vocabulary())
}
