//! Command-line front end. CSV goes to stdout, progress and summaries to stderr.

use clap::{Args, Parser, Subcommand, ValueEnum};
use drcplan::harness::{
    dump_heatmap, evaluate, load_level_set, map_ordered, outcomes_csv, Config, DrcReadout,
    HarnessError, LevelSet, RunManifest, Solver,
};
use drcplan::interp::{
    auc_probe, combine_encoder, episode_features, intervention_score, label_regression,
    largest_solvable_zigzag, offset_regression, parse_ablation, pooled_features,
    propagation_distance, resolve_channels, run_ablation, sample_transitions, steer_weights,
    train_action_probe, transition_pool, AblationMode, AblationSpec, FeatureSet, LabelVariant,
    ProbeTarget, Protocol, Recording, Recurrent, TargetKind,
};
use drcplan::net::{load_weights, save_weights, Gate, Probe, WeightSet};
use drcplan::planner::{
    compile_map, compile_to_weights, compile_validation, default_channel_map, run_planner,
    ChannelMap, CompileScope, Episode, PlannerEdits, RunOptions,
};
use drcplan::sokoban::{
    format_actions, generate_case_level, solve_oracle, CaseKind, Level, DEFAULT_NODE_BUDGET,
};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "drcplan", version, about = "Sokoban planning laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Level set: `suite`, `rooms:N[:SEED]`, a family such as `zigzag:16`, a level file or a directory.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ticks per environment step.
    #[arg(long, global = true)]
    ticks: Option<usize>,
    /// Steps of thinking on the first observation before acting.
    #[arg(long, global = true)]
    thinking_steps: Option<usize>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value settings applied after the config file.
    #[arg(long = "set", global = true)]
    set: Vec<String>,
}

#[derive(Copy, Clone, ValueEnum, PartialEq, Eq)]
enum PlannerKind {
    Synthetic,
    Drc,
    Oracle,
}

#[derive(Args)]
struct NetArgs {
    /// Weight file for `--planner drc`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Linear probe file (`C` weights then a bias per line, one line per action) used
    /// instead of the weights' head.
    #[arg(long)]
    probe: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve levels with the breadth-first oracle.
    Solve { file: Option<String> },
    /// Run one solver on each level and report per-level outcomes.
    Run {
        #[arg(long, value_enum, default_value = "synthetic")]
        planner: PlannerKind,
        #[command(flatten)]
        net: NetArgs,
        /// Directory for per-tick heatmaps.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Channels to dump.
        #[arg(long, default_value = "box_short+agent_short")]
        channels: String,
    },
    /// Solve statistics with a bootstrap interval.
    Evaluate {
        #[arg(long, value_enum, default_value = "synthetic")]
        planner: PlannerKind,
        #[command(flatten)]
        net: NetArgs,
    },
    /// Write a case-study level.
    Generate {
        kind: String,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Compile the planner into DRC(1,1) weights for one grid size.
    CompileWeights {
        #[arg(long, default_value_t = 32)]
        channels: usize,
        #[arg(long, default_value_t = 10)]
        height: usize,
        #[arg(long, default_value_t = 10)]
        width: usize,
        /// Only compare compiled nets with the engine on the validation levels.
        #[arg(long)]
        validate: bool,
    },
    /// Fold the encoder into one gate's input kernel.
    CombineEncoder {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 0)]
        layer: usize,
        #[arg(long, default_value = "i")]
        gate: String,
    },
    /// Score an intervention protocol on sampled planner transitions.
    Intervene {
        /// never, identity, gna[:v], pna[:v] or box_reroute[:v].
        #[arg(long, default_value = "gna:2")]
        protocol: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Planner solve rates with and without an ablation.
    Ablate {
        /// e.g. `mode=cache_1step,channels=plan` or `mode=mean,site=h,channels=box_short`.
        #[arg(long)]
        spec: String,
    },
    /// Plan reach and largest solved zigzag over steering factors.
    Steer {
        #[arg(long, value_delimiter = ',', default_value = "1.0,1.1,1.2,1.3,1.4")]
        factors: Vec<f32>,
        #[arg(long, default_value_t = 60)]
        width: usize,
        #[arg(long, default_value_t = 60)]
        reach_ticks: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,10,12,14,16,18,20")]
        sizes: Vec<usize>,
        /// Also scale this weight file and write it to --out.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Probes and regressions over planner episodes.
    Probe {
        #[arg(value_enum)]
        kind: ProbeKind,
        #[arg(long, default_value = "plan")]
        channels: String,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Episodes used for fitting or polarity; the rest are held out.
        #[arg(long)]
        train: Option<usize>,
    },
    /// Heatmaps of every planner tick, or the mechanism trace.
    Dump {
        #[arg(value_enum, default_value = "heatmaps")]
        what: DumpKind,
        #[arg(long, default_value = "box_short+agent_short")]
        channels: String,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum ProbeKind {
    Offset,
    Label,
    Auc,
    Action,
}

#[derive(Copy, Clone, ValueEnum)]
enum DumpKind {
    Heatmaps,
    Trace,
}

type Res<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

macro_rules! log {
    ($($t:tt)*) => { eprintln!($($t)*) };
}

struct Ctx {
    g: Global,
    config: Config,
    map: ChannelMap,
}

impl Ctx {
    fn new(g: Global) -> Res<Ctx> {
        let mut config = match &g.config {
            Some(p) => Config::load(p).map_err(err)?,
            None => Config::default(),
        };
        for kv in &g.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("--set expects key=value, got {kv:?}"))?;
            config.set(k.trim(), v.trim()).map_err(err)?;
        }
        if let Some(s) = g.seed {
            config.seed = s;
        }
        if let Some(t) = g.ticks {
            config.run.ticks_per_step = t;
        }
        if let Some(t) = g.thinking_steps {
            config.run.thinking_steps = t;
        }
        config.gains.validate().map_err(err)?;
        let map = default_channel_map(config.drc.channels.max(24)).map_err(err)?;
        Ok(Ctx { g, config, map })
    }

    fn levels(&self, default: &str) -> Res<LevelSet> {
        load_level_set(self.g.levels.as_deref().unwrap_or(default)).map_err(err)
    }

    fn opts(&self) -> RunOptions {
        self.config.run.clone()
    }

    fn episodes(&self, levels: &[Level], record_ticks: bool) -> Vec<Episode> {
        let opts = RunOptions {
            record_ticks,
            ..self.opts()
        };
        map_ordered(levels, |l| {
            run_planner(
                l,
                &self.map,
                &self.config.gains,
                &opts,
                &PlannerEdits::default(),
            )
        })
    }

    fn out_dir(&self) -> Res<Option<&Path>> {
        if let Some(d) = &self.g.out {
            fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
        }
        Ok(self.g.out.as_deref())
    }

    fn write_manifest(&self, dir: &Path, levels: &LevelSet) -> Res<()> {
        write(
            &dir.join("manifest.txt"),
            RunManifest::new(&self.config, levels).to_text().as_bytes(),
        )
    }
}

fn write(path: &Path, bytes: &[u8]) -> Res<()> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(s: &str) -> Res<()> {
    std::io::stdout()
        .lock()
        .write_all(s.as_bytes())
        .map_err(err)
}

fn read_probe(path: &Path) -> Res<Probe> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut p = Probe {
        w: Vec::new(),
        b: Vec::new(),
    };
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: Vec<f32> = line
            .split(',')
            .map(|x| x.trim().parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let (b, w) = v.split_last().ok_or("empty probe row")?;
        p.w.push(w.to_vec());
        p.b.push(*b);
    }
    if p.w.len() != 4 {
        return Err(format!("probe needs 4 rows, got {}", p.w.len()));
    }
    Ok(p)
}

fn solver(ctx: &Ctx, kind: PlannerKind, net: &NetArgs) -> Res<Solver> {
    Ok(match kind {
        PlannerKind::Oracle => Solver::Oracle {
            node_budget: DEFAULT_NODE_BUDGET,
        },
        PlannerKind::Synthetic => {
            if net.weights.is_some() {
                return Err(HarnessError::Mismatch(
                    "the synthetic planner takes no weights".into(),
                )
                .to_string());
            }
            Solver::Synthetic {
                map: ctx.map.clone(),
                gains: ctx.config.gains.clone(),
            }
        }
        PlannerKind::Drc => {
            let path = net
                .weights
                .as_ref()
                .ok_or("--planner drc needs --weights")?;
            let weights = load_weights(path, &ctx.config.drc).map_err(err)?;
            let readout = match &net.probe {
                Some(p) => DrcReadout::Probe(read_probe(p)?),
                None => DrcReadout::Head,
            };
            Solver::Drc { weights, readout }
        }
    })
}

fn dump_grids(
    dir: &Path,
    tag: &str,
    grids: &[drcplan::planner::PlanGrid],
    channels: &[usize],
    map: &ChannelMap,
) -> Res<()> {
    for (t, g) in grids.iter().enumerate() {
        for &ch in channels {
            let stem = dir.join(format!("{tag}_tick{t:03}_{}", map.role(ch)));
            let mut ppm = Vec::new();
            let mut csv = Vec::new();
            dump_heatmap(&g.acts, ch, 8, &mut ppm, &mut csv).map_err(err)?;
            write(&stem.with_extension("ppm"), &ppm)?;
            write(&stem.with_extension("csv"), &csv)?;
        }
    }
    Ok(())
}

fn cmd_solve(ctx: &Ctx, file: Option<String>) -> Res<()> {
    let set = match file {
        Some(f) => load_level_set(&f).map_err(err)?,
        None => ctx.levels("suite")?,
    };
    let res = map_ordered(&set.levels, |l| solve_oracle(l, DEFAULT_NODE_BUDGET));
    let mut s = String::from("index,id,solved,length,actions\n");
    for (k, (l, r)) in set.levels.iter().zip(&res).enumerate() {
        let sol = r.solution();
        match sol {
            Some(a) => log!("level {k}: solution length {}", a.len()),
            None => log!("level {k}: no solution ({r:?})"),
        }
        s.push_str(&format!(
            "{k},{},{},{},{}\n",
            l.id.map_or(String::new(), |i| i.to_string()),
            sol.is_some() as u8,
            sol.map_or(String::new(), |a| a.len().to_string()),
            sol.map_or(String::new(), format_actions)
        ));
    }
    emit(&s)
}

fn cmd_run(
    ctx: &Ctx,
    planner: PlannerKind,
    net: &NetArgs,
    dump: Option<PathBuf>,
    channels: &str,
) -> Res<()> {
    let set = ctx.levels("suite")?;
    if let (PlannerKind::Synthetic, Some(dir)) = (planner, &dump) {
        fs::create_dir_all(dir).map_err(err)?;
        let chans = resolve_channels(channels, &ctx.map).map_err(err)?;
        let eps = ctx.episodes(&set.levels, true);
        for (k, ep) in eps.iter().enumerate() {
            dump_grids(
                dir,
                &format!("level{k:03}"),
                &ep.tick_grids,
                &chans,
                &ctx.map,
            )?;
        }
        log!(
            "wrote heatmaps for {} levels to {}",
            eps.len(),
            dir.display()
        );
    } else if dump.is_some() {
        return Err("--dump is available for the synthetic planner".into());
    }
    let (stats, outcomes) = evaluate(
        &solver(ctx, planner, net)?,
        &set.levels,
        &ctx.opts(),
        ctx.config.seed,
    )
    .map_err(err)?;
    log!("{}: solved {}/{}", set.id(), stats.n_solved, stats.n_levels);
    if let Some(d) = ctx.out_dir()? {
        write(&d.join("outcomes.csv"), outcomes_csv(&outcomes).as_bytes())?;
        ctx.write_manifest(d, &set)?;
    }
    emit(&outcomes_csv(&outcomes))
}

fn cmd_evaluate(ctx: &Ctx, planner: PlannerKind, net: &NetArgs) -> Res<()> {
    let set = ctx.levels("suite")?;
    let (stats, outcomes) = evaluate(
        &solver(ctx, planner, net)?,
        &set.levels,
        &ctx.opts(),
        ctx.config.seed,
    )
    .map_err(err)?;
    log!(
        "{}: solve rate {:.3} [{:.3}, {:.3}], mean steps {:.1}",
        set.id(),
        stats.solve_rate,
        stats.ci.lo,
        stats.ci.hi,
        stats.mean_steps
    );
    if let Some(d) = ctx.out_dir()? {
        write(&d.join("stats.csv"), stats.to_csv().as_bytes())?;
        write(&d.join("outcomes.csv"), outcomes_csv(&outcomes).as_bytes())?;
        ctx.write_manifest(d, &set)?;
    }
    emit(&stats.to_csv())
}

fn cmd_generate(ctx: &Ctx, kind: &str, size: Option<usize>) -> Res<()> {
    let k = CaseKind::from_name(kind).ok_or_else(|| format!("unknown level family {kind:?}"))?;
    let level = generate_case_level(k, size.unwrap_or(k.default_size())).map_err(err)?;
    let text = level.to_string();
    match &ctx.g.out {
        Some(p) => {
            write(p, text.as_bytes())?;
            log!(
                "wrote {} {}x{} to {}",
                k.name(),
                level.height(),
                level.width(),
                p.display()
            );
            Ok(())
        }
        None => emit(&text),
    }
}

fn cmd_compile(ctx: &Ctx, channels: usize, height: usize, width: usize, validate: bool) -> Res<()> {
    let map = compile_map(channels).map_err(err)?;
    let gains = ctx.config.gains.compilable();
    if validate {
        let checks = compile_validation(&map, &gains).map_err(err)?;
        let mut s = String::from("level,mismatched_ticks\n");
        for c in &checks {
            let t: Vec<String> = c.mismatched_ticks.iter().map(|t| t.to_string()).collect();
            s.push_str(&format!("{},{}\n", c.level, t.join(";")));
        }
        let bad = checks
            .iter()
            .filter(|c| !c.mismatched_ticks.is_empty())
            .count();
        log!(
            "{bad} of {} validation levels differ from the engine",
            checks.len()
        );
        return emit(&s);
    }
    let ws = compile_to_weights(
        &map,
        &gains,
        CompileScope::ExtensionStoppingWta,
        height,
        width,
    )
    .map_err(err)?;
    let path = ctx.g.out.clone().ok_or("compile-weights needs --out")?;
    save_weights(&ws, &path).map_err(err)?;
    log!(
        "wrote DRC(1,1) weights, {channels} channels, {height}x{width}, to {}",
        path.display()
    );
    emit(&format!(
        "path,layers,ticks,channels,height,width\n{},1,1,{channels},{height},{width}\n",
        path.display()
    ))
}

fn cmd_combine(ctx: &Ctx, weights: &Path, layer: usize, gate: &str) -> Res<()> {
    let ws = load_weights(weights, &ctx.config.drc).map_err(err)?;
    let g = Gate::from_name(gate).ok_or_else(|| format!("unknown gate {gate:?}"))?;
    let ce = combine_encoder(&ws, layer, g).map_err(err)?;
    let k = &ce.kernel;
    let mut s = String::from("out,in,dy,dx,value\n");
    for o in 0..k.c_out {
        for i in 0..k.c_in {
            for y in 0..k.kh {
                for x in 0..k.kw {
                    let v = k.get(o, i, y, x);
                    if v != 0.0 {
                        s.push_str(&format!(
                            "{o},{i},{},{},{v}\n",
                            y as isize - k.origin.0 as isize,
                            x as isize - k.origin.1 as isize
                        ));
                    }
                }
            }
        }
    }
    if let Some(d) = ctx.out_dir()? {
        let b: String = ce
            .bias
            .iter()
            .enumerate()
            .map(|(o, b)| format!("{o},{b}\n"))
            .collect();
        write(
            &d.join("combined_bias.csv"),
            format!("out,bias\n{b}").as_bytes(),
        )?;
    }
    log!("combined kernel {}x{} over {} inputs", k.kh, k.kw, k.c_in);
    emit(&s)
}

fn cmd_intervene(ctx: &Ctx, protocol: &str, n: usize) -> Res<()> {
    let p = Protocol::parse(protocol).ok_or_else(|| format!("unknown protocol {protocol:?}"))?;
    let set = ctx.levels("suite")?;
    let pool = transition_pool(&set.levels, &ctx.map, &ctx.config.gains, &ctx.opts());
    let sample = sample_transitions(&pool, n.min(pool.len()), ctx.config.seed).map_err(err)?;
    let r = intervention_score(
        &sample,
        &p,
        &ctx.map,
        &ctx.config.gains,
        ctx.opts().ticks_per_step,
        ctx.config.seed,
    )
    .map_err(err)?;
    log!(
        "{}: {} of {} transitions took the alternate action",
        r.protocol,
        r.successes,
        r.n
    );
    emit(&r.to_csv())
}

fn cmd_ablate(ctx: &Ctx, spec: &str) -> Res<()> {
    let spec: AblationSpec = parse_ablation(spec, &ctx.map).map_err(err)?;
    let set = ctx.levels("suite")?;
    let means = if spec.mode == AblationMode::MeanActivation {
        let source = spec.mean_source.clone().unwrap_or_else(|| set.id());
        let src = if source == set.id() {
            set.clone()
        } else {
            load_level_set(&source).map_err(err)?
        };
        let eps = ctx.episodes(&src.levels, true);
        let m = drcplan::interp::channel_means(&eps, ctx.map.channels, spec.site, &src.id())
            .map_err(err)?;
        if let Some(d) = ctx.out_dir()? {
            write(&d.join("means.csv"), m.to_csv().as_bytes())?;
        }
        Some(m)
    } else {
        None
    };
    let r = run_ablation(
        &set.levels,
        &ctx.map,
        &ctx.config.gains,
        &ctx.opts(),
        &spec,
        means.as_ref(),
    )
    .map_err(err)?;
    log!(
        "{}: solve rate {:.3} -> {:.3}",
        spec.mode.name(),
        r.baseline_rate(),
        r.ablated_rate()
    );
    if let Some(d) = ctx.out_dir()? {
        write(&d.join("ablation.csv"), r.to_csv().as_bytes())?;
        ctx.write_manifest(d, &set)?;
    }
    emit(&r.summary_csv())
}

fn cmd_steer(
    ctx: &Ctx,
    factors: &[f32],
    width: usize,
    reach_ticks: usize,
    sizes: &[usize],
    weights: Option<&Path>,
) -> Res<()> {
    let mut s = String::from("factor,reach,largest_zigzag\n");
    for &f in factors {
        if !(f > 0.0) {
            return Err(format!("factor must be positive, got {f}"));
        }
        let g = ctx.config.gains.steered(f);
        let reach = propagation_distance(&g, &ctx.map, width, reach_ticks);
        let zz = largest_solvable_zigzag(&g, &ctx.map, sizes, &ctx.opts());
        log!("factor {f}: reach {reach}, largest zigzag {zz:?}");
        s.push_str(&format!(
            "{f},{reach},{}\n",
            zz.map_or(String::new(), |z| z.to_string())
        ));
    }
    if let Some(w) = weights {
        let ws: WeightSet = load_weights(w, &ctx.config.drc).map_err(err)?;
        let out = ctx
            .g
            .out
            .clone()
            .ok_or("--weights needs --out for the steered file")?;
        let f = *factors.last().ok_or("no factors")?;
        save_weights(
            &steer_weights(&ws, f, &[Recurrent::Wh1, Recurrent::Wh2]).map_err(err)?,
            &out,
        )
        .map_err(err)?;
        log!("wrote weights steered by {f} to {}", out.display());
    }
    emit(&s)
}

fn cmd_probe(
    ctx: &Ctx,
    kind: ProbeKind,
    channels: &str,
    horizon: usize,
    train: Option<usize>,
) -> Res<()> {
    let set = ctx.levels("suite")?;
    let eps = ctx.episodes(&set.levels, false);
    let recs: Vec<Recording> = eps.iter().map(Recording::from_episode).collect();
    let train = train.unwrap_or(recs.len() / 2);
    let csv = match kind {
        ProbeKind::Offset => {
            let chans = resolve_channels(channels, &ctx.map).map_err(err)?;
            let feats: Vec<_> = recs
                .iter()
                .map(|r| episode_features(r, FeatureSet::Base))
                .collect();
            offset_regression(&recs, &feats, &chans)
                .map_err(err)?
                .to_csv()
        }
        ProbeKind::Label => {
            let chans = resolve_channels(channels, &ctx.map).map_err(err)?;
            label_regression(&recs, &chans).map_err(err)?.to_csv()
        }
        ProbeKind::Auc => {
            let mut s = String::new();
            for (kind, group) in [
                (TargetKind::BoxMove, ctx.map.box_short),
                (TargetKind::AgentMove, ctx.map.agent_short),
            ] {
                for variant in [LabelVariant::Within(horizon), LabelVariant::After(horizon)] {
                    let r = auc_probe(&recs, &group, ProbeTarget { kind, variant }, train)
                        .map_err(err)?;
                    let body = r.to_csv();
                    s.push_str(if s.is_empty() {
                        &body
                    } else {
                        body.split_once('\n').map_or("", |x| x.1)
                    });
                }
            }
            s
        }
        ProbeKind::Action => {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for ep in &eps {
                for (g, st) in ep.grids.iter().zip(&ep.steps) {
                    x.push(pooled_features(&g.acts));
                    y.push(st.action.index());
                }
            }
            let fit = train_action_probe(&x, &y, 4, 0.25).map_err(err)?;
            log!(
                "action probe: {} iterations, loss {:.4}",
                fit.iterations,
                fit.loss
            );
            format!(
                "samples,iterations,loss,train_accuracy,test_accuracy\n{},{},{},{},{}\n",
                x.len(),
                fit.iterations,
                fit.loss,
                fit.train_accuracy,
                fit.test_accuracy
            )
        }
    };
    if let Some(d) = ctx.out_dir()? {
        ctx.write_manifest(d, &set)?;
    }
    emit(&csv)
}

fn cmd_dump(ctx: &Ctx, what: DumpKind, channels: &str) -> Res<()> {
    let set = ctx.levels("two_paths")?;
    let opts = RunOptions {
        record_ticks: true,
        record_trace: true,
        ..ctx.opts()
    };
    let eps = map_ordered(&set.levels, |l| {
        run_planner(
            l,
            &ctx.map,
            &ctx.config.gains,
            &opts,
            &PlannerEdits::default(),
        )
    });
    match what {
        DumpKind::Trace => {
            let mut s = String::from("level,kind,row,col,channel,tick\n");
            for (k, ep) in eps.iter().enumerate() {
                for e in &ep.trace {
                    s.push_str(&format!("{k},{e}\n"));
                }
            }
            emit(&s)
        }
        DumpKind::Heatmaps => {
            let dir = ctx.out_dir()?.ok_or("dump heatmaps needs --out")?;
            let chans = resolve_channels(channels, &ctx.map).map_err(err)?;
            let mut s = String::from("level,ticks,files\n");
            for (k, ep) in eps.iter().enumerate() {
                dump_grids(
                    dir,
                    &format!("level{k:03}"),
                    &ep.tick_grids,
                    &chans,
                    &ctx.map,
                )?;
                s.push_str(&format!(
                    "{k},{},{}\n",
                    ep.tick_grids.len(),
                    2 * ep.tick_grids.len() * chans.len()
                ));
            }
            ctx.write_manifest(dir, &set)?;
            emit(&s)
        }
    }
}

fn run(cli: Cli) -> Res<()> {
    let ctx = Ctx::new(cli.global)?;
    match cli.cmd {
        Cmd::Solve { file } => cmd_solve(&ctx, file),
        Cmd::Run {
            planner,
            net,
            dump,
            channels,
        } => cmd_run(&ctx, planner, &net, dump, &channels),
        Cmd::Evaluate { planner, net } => cmd_evaluate(&ctx, planner, &net),
        Cmd::Generate { kind, size } => cmd_generate(&ctx, &kind, size),
        Cmd::CompileWeights {
            channels,
            height,
            width,
            validate,
        } => cmd_compile(&ctx, channels, height, width, validate),
        Cmd::CombineEncoder {
            weights,
            layer,
            gate,
        } => cmd_combine(&ctx, &weights, layer, &gate),
        Cmd::Intervene { protocol, n } => cmd_intervene(&ctx, &protocol, n),
        Cmd::Ablate { spec } => cmd_ablate(&ctx, &spec),
        Cmd::Steer {
            factors,
            width,
            reach_ticks,
            sizes,
            weights,
        } => cmd_steer(
            &ctx,
            &factors,
            width,
            reach_ticks,
            &sizes,
            weights.as_deref(),
        ),
        Cmd::Probe {
            kind,
            channels,
            horizon,
            train,
        } => cmd_probe(&ctx, kind, &channels, horizon, train),
        Cmd::Dump { what, channels } => cmd_dump(&ctx, what, &channels),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log!("error: {e}");
            ExitCode::from(1)
        }
    }
}
