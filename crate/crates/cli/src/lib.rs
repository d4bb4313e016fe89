//! Argument parsing and subcommand dispatch for the `espatial` binary.
//!
//! [`cli_dispatch`] never exits the process: it writes to the given streams
//! and returns the exit code, 0 on success, 1 on a domain error, 2 on a
//! usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use espatial::bench::{
    generate_dataset, run_bench, run_reassembly, CategoryMix, QaDataset, ReassemblyParams,
    ScenarioReport,
};
use espatial::config::EngineConfig;
use espatial::cot::{question_for, reason, reason_over_plan, Grounding, StepStatus};
use espatial::files::{self, ANSWER_SCHEMA, LEGO_SCHEMA, PLAN_SCHEMA, QUERY_SCHEMA, TRACE_SCHEMA};
use espatial::lego::LegoStructure;
use espatial::perception::{
    load_graph, load_scene, perceive, save_graph, synth_scene, SynthParams,
};
use espatial::planner::{
    self, parse_command, replay, serialize_command, structure_hash, AssemblyPlan,
};
use espatial::query::{answer_with_layout, Answer, Category, QueryParams, SpatialQuery};
use espatial::scene::{NodeId, Provenance, SceneGraph};

#[derive(Debug, Parser)]
#[command(
    name = "espatial",
    version,
    about = "Spatial scene graphs, queries, brick assembly planning, and benchmarks"
)]
#[command(arg_required_else_help = true, propagate_version = true)]
struct Cli {
    /// Engine configuration file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for synthetic scenes, datasets, and scenarios.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the machine-readable result here.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a scene graph from a scene file, or from a synthetic scene.
    BuildGraph(BuildGraphArgs),
    /// Answer a spatial query over a scene graph.
    Query(QueryArgs),
    /// Order a brick structure into placement commands.
    Plan(PlanArgs),
    /// Check a brick structure, or a command list, for violations.
    Validate(ValidateArgs),
    /// Score the engine on a question dataset.
    Bench(BenchArgs),
    /// Generate an oracle-labeled question dataset.
    GenDataset(GenDatasetArgs),
    /// Run seeded photograph, describe, and rebuild scenarios.
    Reassembly(ReassemblyArgs),
}

#[derive(Debug, Args)]
struct BuildGraphArgs {
    /// Scene file; without it a synthetic scene is drawn from --seed.
    #[arg(long, value_name = "PATH")]
    scene: Option<PathBuf>,
    /// Previous graph whose node ids should carry over.
    #[arg(long, value_name = "PATH")]
    prev: Option<PathBuf>,
    /// Restrict detection to the entities this question mentions.
    #[arg(long)]
    question: Option<String>,
    /// Objects in the synthetic scene.
    #[arg(long, default_value_t = 6, conflicts_with = "scene")]
    objects: usize,
    /// Synthetic brick structure instead of tabletop objects.
    #[arg(long, conflicts_with = "scene")]
    bricks: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["query", "category"]))]
struct QueryArgs {
    /// Scene graph file.
    #[arg(long, value_name = "PATH")]
    graph: PathBuf,
    /// Query file.
    #[arg(long, value_name = "PATH")]
    query: Option<PathBuf>,
    /// Ask inline instead: adjacency, distance, reachability,
    /// success_judgment, overlap, arm_feasibility, or direction.
    #[arg(long, value_parser = parse_category)]
    category: Option<Category>,
    /// Subject node id.
    #[arg(long)]
    subject: Option<String>,
    /// Object node id, for pairwise categories.
    #[arg(long)]
    object: Option<String>,
    /// Target structure for success judgment.
    #[arg(long, value_name = "PATH")]
    target: Option<PathBuf>,
    /// Answer through step-validated reasoning and emit its trace.
    #[arg(long)]
    reason: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Target structure file.
    #[arg(long, value_name = "PATH")]
    target: PathBuf,
    /// Also check every command through step-validated reasoning.
    #[arg(long)]
    simulate: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["structure", "commands"]))]
struct ValidateArgs {
    /// Structure file.
    #[arg(long, value_name = "PATH")]
    structure: Option<PathBuf>,
    /// Text file with one placement command per line.
    #[arg(long, value_name = "PATH")]
    commands: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Dataset file; without it one is generated from --seed.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Size of the generated dataset.
    #[arg(long, default_value_t = 1000, conflicts_with = "dataset")]
    items: usize,
}

#[derive(Debug, Args)]
struct GenDatasetArgs {
    /// Number of questions.
    #[arg(long, default_value_t = 1000)]
    items: usize,
    /// Category weights, e.g. `distance=2,overlap=1`; unlisted categories
    /// are left out. Uniform over all seven by default.
    #[arg(long, value_parser = parse_mix)]
    mix: Option<CategoryMix>,
}

#[derive(Debug, Args)]
struct ReassemblyArgs {
    /// Scenarios to run, seeded --seed, --seed + 1, and so on.
    #[arg(long, default_value_t = 20)]
    runs: u64,
    /// Largest target size, in bricks.
    #[arg(long, default_value_t = 12)]
    max_bricks: usize,
    /// Drop one brick's detection in every scenario.
    #[arg(long)]
    dropout: bool,
}

fn parse_category(s: &str) -> Result<Category, String> {
    Category::ALL
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| {
            format!(
                "expected one of {}",
                Category::ALL.map(|c| c.as_str()).join(", ")
            )
        })
}

fn parse_mix(s: &str) -> Result<CategoryMix, String> {
    let mut mix = std::collections::BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("`{part}` is not CATEGORY=WEIGHT"))?;
        let w: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("weight `{v}` is not a number"))?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(format!("weight `{v}` must be non-negative"));
        }
        mix.insert(parse_category(k.trim())?, w);
    }
    Ok(CategoryMix(mix))
}

/// Failure that maps to exit code 1.
struct Domain(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Domain {
    fn from(e: E) -> Self {
        Domain(e.into())
    }
}

struct Ctx<'a> {
    cfg: EngineConfig,
    seed: u64,
    out: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn say(&mut self, text: impl AsRef<str>) -> anyhow::Result<()> {
        writeln!(self.stdout, "{}", text.as_ref()).context("writing to stdout")
    }

    fn emit(&self, json: &str) -> anyhow::Result<()> {
        if let Some(path) = &self.out {
            files::write(path, json)?;
        }
        Ok(())
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn cli_dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stderr, "{text}");
                    2
                }
                _ => {
                    let _ = writeln!(stderr, "{text}");
                    let mut root = <Cli as clap::CommandFactory>::command();
                    root.build();
                    let sub = argv
                        .iter()
                        .skip(1)
                        .filter_map(|a| a.to_str())
                        .find_map(|a| root.find_subcommand(a).map(|c| c.get_name().to_string()));
                    if let Some(help) = sub
                        .and_then(|name| root.find_subcommand_mut(&name).map(|c| c.render_help()))
                    {
                        let _ = write!(stderr, "{help}");
                    }
                    2
                }
            };
        }
    };
    let cfg = match &cli.config {
        Some(p) => match EngineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(stderr, "error: config {}: {e}", p.display());
                return 1;
            }
        },
        None => EngineConfig::default(),
    };
    let mut ctx = Ctx {
        cfg,
        seed: cli.seed,
        out: cli.out,
        stdout,
    };
    let result = match cli.command {
        Command::BuildGraph(a) => build_graph(&mut ctx, a),
        Command::Query(a) => query(&mut ctx, a),
        Command::Plan(a) => plan(&mut ctx, a),
        Command::Validate(a) => validate(&mut ctx, a),
        Command::Bench(a) => bench(&mut ctx, a),
        Command::GenDataset(a) => gen_dataset(&mut ctx, a),
        Command::Reassembly(a) => reassembly(&mut ctx, a),
    };
    match result {
        Ok(()) => 0,
        Err(Domain(e)) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn load_structure(path: &Path) -> anyhow::Result<LegoStructure> {
    files::load(path, LEGO_SCHEMA).with_context(|| format!("structure {}", path.display()))
}

fn build_graph(ctx: &mut Ctx, a: BuildGraphArgs) -> Result<(), Domain> {
    let dynamics = ctx.cfg.dynamics();
    let frame = match &a.scene {
        Some(p) => load_scene(p).with_context(|| format!("scene {}", p.display()))?,
        None => {
            synth_scene(
                ctx.seed,
                SynthParams {
                    n_objects: a.objects,
                    brick_mode: a.bricks,
                },
                &dynamics,
            )
            .frame
        }
    };
    let prev = a
        .prev
        .as_ref()
        .map(|p| load_graph(p).with_context(|| format!("graph {}", p.display())))
        .transpose()?;
    let backend = ctx.cfg.backend()?;
    let g = perceive(
        a.question.as_deref(),
        &frame,
        backend.as_ref(),
        prev.as_ref(),
        &dynamics,
    )?;
    if let Some(p) = &ctx.out {
        save_graph(p, &g)?;
    }
    ctx.say(format!(
        "scene graph t={}: {} nodes, {} edges",
        g.t,
        g.nodes.len(),
        g.edges.len()
    ))?;
    for n in &g.nodes {
        ctx.say(format!(
            "  {:<16} {:<7} depth {:.3} m",
            n.id.as_str(),
            n.color.to_string(),
            n.depth_m
        ))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AnswerDoc {
    query: SpatialQuery,
    #[serde(flatten)]
    answer: Answer,
}

fn query(ctx: &mut Ctx, a: QueryArgs) -> Result<(), Domain> {
    let g: SceneGraph =
        load_graph(&a.graph).with_context(|| format!("graph {}", a.graph.display()))?;
    let q = match (&a.query, a.category) {
        (Some(p), _) => {
            files::load(p, QUERY_SCHEMA).with_context(|| format!("query {}", p.display()))?
        }
        (None, Some(category)) => SpatialQuery {
            category,
            subject: a.subject.clone().map(NodeId::new),
            object: a.object.clone().map(NodeId::new),
            params: QueryParams {
                target: a.target.as_deref().map(load_structure).transpose()?,
            },
        },
        (None, None) => unreachable!("clap requires --query or --category"),
    };
    let cfg = &ctx.cfg;
    if a.reason {
        let mut grounding = Grounding::new(g)
            .with_workspace(cfg.workspace)
            .with_layout(cfg.layout);
        if let Some(t) = &q.params.target {
            grounding = grounding.with_target(t.clone());
        }
        let client = cfg.client()?;
        let trace = reason(
            &question_for(&q),
            &grounding,
            client.as_ref(),
            cfg.client.policy,
        )?;
        ctx.emit(&files::encode(&trace, TRACE_SCHEMA))?;
        ctx.say(&trace.question)?;
        for s in &trace.steps {
            let status = match &s.status {
                StepStatus::Validated => "ok".to_string(),
                StepStatus::Rejected { rule, .. } => format!("rejected: {rule}"),
            };
            ctx.say(format!("  [{status}] {}", s.claim))?;
        }
        match trace.answer() {
            Some(v) => ctx.say(format!("answer: {v}"))?,
            None => {
                ctx.say("abstained")?;
                return Err(anyhow!("the reasoning client abstained").into());
            }
        }
    } else {
        let answer = answer_with_layout(&q, &g, &cfg.workspace, &cfg.layout)?;
        ctx.emit(&files::encode(
            &AnswerDoc {
                query: q,
                answer: answer.clone(),
            },
            ANSWER_SCHEMA,
        ))?;
        ctx.say(format!("answer: {}", answer.value))?;
        for c in &answer.trace {
            ctx.say(format!("  {}", c.claim))?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    #[serde(flatten)]
    plan: AssemblyPlan,
    /// The commands in the text grammar.
    text: Vec<String>,
}

fn plan(ctx: &mut Ctx, a: PlanArgs) -> Result<(), Domain> {
    let target = load_structure(&a.target)?.canonicalize();
    let p = planner::plan(&target)?;
    if a.simulate {
        let client = ctx.cfg.client()?;
        let empty = SceneGraph::empty(Provenance::Synthetic);
        let checked = reason_over_plan(
            &target,
            &empty,
            client.as_ref(),
            &ctx.cfg.dynamics(),
            ctx.cfg.client.policy,
        )?;
        ctx.say(format!(
            "all {} commands validated in simulation",
            checked.traces.len()
        ))?;
    }
    let text: Vec<String> = p.commands.iter().map(serialize_command).collect();
    ctx.emit(&files::encode(
        &PlanDoc {
            plan: p,
            text: text.clone(),
        },
        PLAN_SCHEMA,
    ))?;
    for line in &text {
        ctx.say(line)?;
    }
    Ok(())
}

fn validate(ctx: &mut Ctx, a: ValidateArgs) -> Result<(), Domain> {
    if let Some(path) = &a.structure {
        let s = load_structure(path)?;
        let violations = s.validate();
        ctx.emit(
            &serde_json::to_string_pretty(&serde_json::json!({ "violations": violations }))
                .expect("serializable"),
        )?;
        if violations.is_empty() {
            ctx.say(format!("valid: {} bricks", s.len()))?;
            return Ok(());
        }
        for v in &violations {
            ctx.say(format!("violation: {v}"))?;
        }
        return Err(anyhow!("{} violation(s)", violations.len()).into());
    }
    let path = a.commands.expect("clap requires --structure or --commands");
    let text = files::read(&path)?;
    let mut commands = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let c = parse_command(line).map_err(|e| anyhow!("{}:{}:{}", path.display(), i + 1, e))?;
        commands.push(c);
    }
    let p = AssemblyPlan {
        commands,
        target_hash: String::new(),
    };
    match replay(&p) {
        Ok(s) => {
            ctx.say(format!(
                "valid: {} commands, structure {}",
                p.commands.len(),
                &structure_hash(&s)[..12]
            ))?;
            Ok(())
        }
        Err(e) => {
            ctx.say(format!("violation: {e}"))?;
            Err(anyhow!(e).into())
        }
    }
}

fn bench(ctx: &mut Ctx, a: BenchArgs) -> Result<(), Domain> {
    let ds = match &a.dataset {
        Some(p) => QaDataset::load(p).with_context(|| format!("dataset {}", p.display()))?,
        None => generate_dataset(ctx.seed, a.items, &CategoryMix::default(), &ctx.cfg),
    };
    let report = run_bench(&ds, &ctx.cfg)?;
    ctx.emit(&report.to_json())?;
    let summary = report.summary();
    ctx.say(summary.trim_end())?;
    Ok(())
}

fn gen_dataset(ctx: &mut Ctx, a: GenDatasetArgs) -> Result<(), Domain> {
    let ds = generate_dataset(ctx.seed, a.items, &a.mix.unwrap_or_default(), &ctx.cfg);
    ctx.emit(&ds.to_json())?;
    let mut counts = std::collections::BTreeMap::new();
    for it in &ds.items {
        *counts.entry(it.category().as_str()).or_insert(0usize) += 1;
    }
    ctx.say(format!(
        "{} items, seed {}",
        ds.items.len(),
        ds.generator.seed
    ))?;
    for (c, n) in counts {
        ctx.say(format!("  {c:<17} {n}"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReassemblyDoc<'a> {
    params: ReassemblyParams,
    description_accuracy: f64,
    assembly_success_rate: f64,
    scenarios: &'a [ScenarioReport],
}

fn reassembly(ctx: &mut Ctx, a: ReassemblyArgs) -> Result<(), Domain> {
    let params = ReassemblyParams {
        max_bricks: a.max_bricks,
        dropout: a.dropout,
    };
    let runs: Vec<ScenarioReport> = (0..a.runs)
        .map(|i| run_reassembly(ctx.seed.wrapping_add(i), params, &ctx.cfg))
        .collect();
    let n = runs.len().max(1) as f64;
    let described = runs.iter().filter(|r| r.description_correct).count();
    let assembled = runs.iter().filter(|r| r.assembly_success).count();
    let doc = ReassemblyDoc {
        params,
        description_accuracy: described as f64 / n,
        assembly_success_rate: assembled as f64 / n,
        scenarios: &runs,
    };
    ctx.emit(&serde_json::to_string_pretty(&doc).expect("serializable"))?;
    for r in &runs {
        let status = match &r.failure {
            Some(f) => format!("stopped at {:?}: {}", f.stage, f.message),
            None => format!("{} commands", r.commands),
        };
        ctx.say(format!(
            "seed {:>4}: {:>2} bricks, description {}, assembly {}, {status}",
            r.seed,
            r.target.len(),
            if r.description_correct {
                "correct"
            } else {
                "WRONG"
            },
            if r.assembly_success { "ok" } else { "FAILED" },
        ))?;
        for b in &r.missing {
            ctx.say(format!("    missing: {b}"))?;
        }
        for b in &r.extra {
            ctx.say(format!("    extra:   {b}"))?;
        }
    }
    ctx.say(format!(
        "description accuracy {described}/{}, assembly success {assembled}/{}",
        runs.len(),
        runs.len()
    ))?;
    Ok(())
}
