use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harmcalc_core::adversary::{utility_tie_witness, shifted_objective_witness, ActionUtilities, ShiftTag};
use harmcalc_core::dose::{
    dose_sweep, shifted_model_analysis, tradeoff_curve, utility_at_harm_reduction,
    write_tradeoff_csv, DoseGrid, GamParams,
};
use harmcalc_core::format::{sig12, write_metadata};
use harmcalc_core::harm::{HarmEngine, Objective};
use harmcalc_core::hetanm::RNG_NAME;
use harmcalc_core::model_file::{load_model, save_model, LoadedModel};
use harmcalc_core::scm::{DiscreteScm, FactualWorld};
use harmcalc_core::verify::{run_verification, VerifyConfig};
use harmcalc_core::zoo::{
    assistant_checks, preemption_checks, preemption_model, treatment_checks, treatment_model,
    Agent, AssistantSpec, ReferenceCheck,
};

#[derive(Parser, Debug)]
#[command(name = "harmcalc", version, about = "Counterfactual harm calculator")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Harm and benefit of an action given its factual outcome.
    Harm(HarmArgs),
    /// Expected utility, harm and benefit of every action.
    Expected(ModelArgs),
    /// Harm-penalized optimal action for each λ.
    Policy(PolicyArgs),
    /// Conditional average treatment effect of an action.
    Cate(CateArgs),
    /// Probability of necessity.
    Pn(PnArgs),
    /// Dose-response sweep, trade-off curve and shifted-model analysis.
    Dose(DoseArgs),
    /// Witness environments in which a factual objective is harmful.
    Adversary(AdversaryArgs),
    /// Canned models and their reference values.
    Zoo(ZooArgs),
    /// Full invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    /// Context assignment `var=value`; repeatable.
    #[arg(long = "context", value_name = "K=V")]
    context: Vec<String>,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HarmArgs {
    #[command(flatten)]
    m: ModelArgs,
    #[arg(long)]
    action: String,
    /// Factual outcome `var=value`; one per outcome variable.
    #[arg(long = "outcome", value_name = "K=V", required = true)]
    outcome: Vec<String>,
}

#[derive(Args, Debug)]
struct PolicyArgs {
    #[command(flatten)]
    m: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
}

#[derive(Args, Debug)]
struct CateArgs {
    #[command(flatten)]
    m: ModelArgs,
    /// Treated action.
    #[arg(long)]
    action: String,
    /// Control action; defaults to the default action in the context.
    #[arg(long)]
    control: Option<String>,
    /// Compare the probability of this event. Without it, outcome labels
    /// are read as numbers and their means are compared.
    #[arg(long = "outcome", value_name = "K=V")]
    outcome: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Factual {
    Observed,
    Intervened,
}

#[derive(Args, Debug)]
struct PnArgs {
    #[command(flatten)]
    m: ModelArgs,
    /// Factual action.
    #[arg(long)]
    action: String,
    /// Factual effect `var=value`.
    #[arg(long = "outcome", value_name = "K=V")]
    outcome: String,
    /// Counterfactual action; defaults to the default action.
    #[arg(long)]
    control: Option<String>,
    #[arg(long, value_enum, default_value_t = Factual::Intervened)]
    factual: Factual,
}

#[derive(Args, Debug)]
struct DoseArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
    beta: Vec<f64>,
    #[arg(long, default_value = "0:30:0.1")]
    grid: String,
    /// Directory for `dose_response.csv`, `tradeoff.csv` and `shifted.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AdversaryArgs {
    #[command(flatten)]
    m: ModelArgs,
    /// Action compared against the default.
    #[arg(long)]
    action: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ZooModel {
    Treatment,
    Assistant,
    Preemption,
}

#[derive(Args, Debug)]
struct ZooArgs {
    #[arg(value_enum)]
    name: ZooModel,
    /// Export the model file here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = VerifyConfig::default().seed)]
    seed: u64,
    /// Monte Carlo samples per closed-form comparison.
    #[arg(long, default_value_t = VerifyConfig::default().mc_samples)]
    samples: u64,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] harmcalc_core::error::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0} check(s) failed")]
    Verification(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn split_pair(s: &str) -> CliResult<(&str, &str)> {
    s.split_once('=')
        .ok_or_else(|| usage(format!("expected var=value, got `{s}`")))
}

fn parse_pairs(items: &[String]) -> CliResult<Vec<(&str, &str)>> {
    items.iter().map(|s| split_pair(s)).collect()
}

struct Loaded {
    model: LoadedModel,
    context: Vec<usize>,
}

fn load(args: &ModelArgs) -> CliResult<Loaded> {
    let model = load_model(&args.model)?;
    let ctx = model.scm.assignment(&parse_pairs(&args.context)?)?;
    let context = model.scm.context_values(&ctx)?;
    Ok(Loaded { model, context })
}

fn outcome_values(scm: &DiscreteScm, items: &[String]) -> CliResult<Vec<usize>> {
    let given = scm.assignment(&parse_pairs(items)?)?;
    let outcomes = &scm.roles().outcomes;
    if let Some(&(v, _)) = given.pairs().iter().find(|(v, _)| !outcomes.contains(v)) {
        return Err(usage(format!("`{}` is not an outcome variable", scm.variables()[v].name)));
    }
    outcomes
        .iter()
        .map(|&v| {
            given
                .get(v)
                .ok_or_else(|| usage(format!("missing --outcome for `{}`", scm.variables()[v].name)))
        })
        .collect()
}

fn default_action(scm: &DiscreteScm, x: &[usize]) -> CliResult<usize> {
    scm.deterministic_default(&scm.context_assignment(x))?
        .ok_or_else(|| usage("the default policy is stochastic here; pass --control"))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn context_label(scm: &DiscreteScm, x: &[usize]) -> String {
    scm.roles()
        .context
        .iter()
        .zip(x)
        .map(|(&v, &i)| format!("{}={}", scm.variables()[v].name, scm.variables()[v].domain[i]))
        .collect::<Vec<_>>()
        .join(";")
}

fn harm(args: &HarmArgs) -> CliResult<()> {
    let l = load(&args.m)?;
    let scm = &l.model.scm;
    let a = scm.action_index(&args.action)?;
    let y = outcome_values(scm, &args.outcome)?;
    let (h, b) = HarmEngine::new(scm, &l.model.utility)?.harm_and_benefit(a, &l.context, &y)?;
    let mut w = output(args.m.out.as_deref())?;
    writeln!(w, "harm={}", sig12(h))?;
    writeln!(w, "benefit={}", sig12(b))?;
    w.flush()?;
    Ok(())
}

fn expected(args: &ModelArgs) -> CliResult<()> {
    let l = load(args)?;
    let scm = &l.model.scm;
    let r = HarmEngine::new(scm, &l.model.utility)?.report(&l.context, 0.0)?;
    let mut w = output(args.out.as_deref())?;
    write_metadata(
        &mut w,
        &[
            ("context", context_label(scm, &l.context)),
            ("default_expected_utility", sig12(r.default_expected_utility)),
        ],
    )?;
    writeln!(w, "action,expected_utility,expected_harm,expected_benefit,decomposition_residual")?;
    for s in &r.actions {
        writeln!(
            w,
            "{},{},{},{},{}",
            scm.action_label(s.action),
            sig12(s.expected_utility),
            sig12(s.expected_harm),
            sig12(s.expected_benefit),
            sig12(r.decomposition_residual(s.action))
        )?;
    }
    w.flush()?;
    Ok(())
}

fn policy(args: &PolicyArgs) -> CliResult<()> {
    let l = load(&args.m)?;
    let scm = &l.model.scm;
    let engine = HarmEngine::new(scm, &l.model.utility)?;
    let lambdas = if args.lambda.is_empty() { vec![0.0] } else { args.lambda.clone() };
    let mut w = output(args.m.out.as_deref())?;
    write_metadata(&mut w, &[("context", context_label(scm, &l.context))])?;
    writeln!(w, "lambda,action,hpu,expected_utility,expected_harm,dominated_by")?;
    for lambda in lambdas {
        let (a, r) = engine.hpu_optimal_action(lambda, &l.context)?;
        let s = &r.actions[a];
        let dominated = engine.needlessly_harmful(a, &l.context)?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            sig12(lambda),
            scm.action_label(a),
            sig12(s.hpu),
            sig12(s.expected_utility),
            sig12(s.expected_harm),
            dominated.map(|d| scm.action_label(d)).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cate(args: &CateArgs) -> CliResult<()> {
    let l = load(&args.m)?;
    let scm = &l.model.scm;
    let treated = scm.action_index(&args.action)?;
    let control = match &args.control {
        Some(c) => scm.action_index(c)?,
        None => default_action(scm, &l.context)?,
    };
    let ctx = scm.context_assignment(&l.context);
    let value = if args.outcome.is_empty() {
        let outcomes = &scm.roles().outcomes;
        let [y] = outcomes.as_slice() else {
            return Err(usage("several outcome variables; pass --outcome to pick an event"));
        };
        let numeric = scm.variables()[*y]
            .domain
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| usage("outcome labels are not numeric; pass --outcome to pick an event"))?;
        scm.cate(treated, control, &ctx, |o| numeric[o[0]])?
    } else {
        let event = scm.assignment(&parse_pairs(&args.outcome)?)?;
        let outcomes = scm.roles().outcomes.clone();
        let idx: Vec<(usize, usize)> = event
            .pairs()
            .iter()
            .map(|&(v, x)| {
                outcomes
                    .iter()
                    .position(|&o| o == v)
                    .map(|p| (p, x))
                    .ok_or_else(|| usage(format!("`{}` is not an outcome variable", scm.variables()[v].name)))
            })
            .collect::<CliResult<_>>()?;
        scm.cate(treated, control, &ctx, |o| idx.iter().all(|&(p, x)| o[p] == x) as u8 as f64)?
    };
    let mut w = output(args.m.out.as_deref())?;
    writeln!(w, "cate={}", sig12(value))?;
    w.flush()?;
    Ok(())
}

fn pn(args: &PnArgs) -> CliResult<()> {
    let l = load(&args.m)?;
    let scm = &l.model.scm;
    let a = scm.action_index(&args.action)?;
    let counter = match &args.control {
        Some(c) => scm.action_index(c)?,
        None => default_action(scm, &l.context)?,
    };
    let (k, v) = split_pair(&args.outcome)?;
    let ev = scm.var_index(k)?;
    let ex = scm.value_index(ev, v)?;
    let factual = match args.factual {
        Factual::Observed => FactualWorld::Observed,
        Factual::Intervened => FactualWorld::Intervened,
    };
    if !scm.roles().context.is_empty() {
        return Err(usage("pn does not condition on a context; use a model without context variables"));
    }
    let mut p = 0.0;
    for other in (0..scm.variables()[ev].domain.len()).filter(|&o| o != ex) {
        p += scm.prob_necessity((scm.action(), a), (ev, ex), counter, other, factual)?;
    }
    let mut w = output(args.m.out.as_deref())?;
    writeln!(w, "pn={}", sig12(p))?;
    w.flush()?;
    Ok(())
}

fn dose(args: &DoseArgs) -> CliResult<()> {
    let p = GamParams::default();
    let grid = DoseGrid::parse(&args.grid)?;
    let lambdas = if args.lambda.is_empty() { vec![0.0] } else { args.lambda.clone() };
    let table = dose_sweep(&p, &grid, &lambdas)?;
    let meta = [("grid", args.grid.clone()), ("model", "random-effects GAM, default dose 0".to_string())];
    let Some(dir) = &args.out else {
        table.write_csv(&mut io::stdout().lock(), &meta)?;
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let mut w = output(Some(&dir.join("dose_response.csv")))?;
    table.write_csv(&mut w, &meta)?;
    w.flush()?;

    let curve = tradeoff_curve(&p, &grid)?;
    let mut w = output(Some(&dir.join("tradeoff.csv")))?;
    write_tradeoff_csv(&mut w, &curve, &meta)?;
    w.flush()?;

    let shifted = shifted_model_analysis(&p, &args.beta, &lambdas, &grid)?;
    let mut w = output(Some(&dir.join("shifted.csv")))?;
    shifted.write_csv(&mut w, &meta)?;
    w.flush()?;

    let mut out = io::stdout().lock();
    for (j, l) in lambdas.iter().enumerate() {
        writeln!(out, "optimal_dose lambda={} dose={}", sig12(*l), sig12(table.argmax(j).dose))?;
    }
    for r in [0.5, 0.9] {
        if let Some(row) = utility_at_harm_reduction(&curve, r) {
            writeln!(
                out,
                "harm_reduction={} dose={} relative_utility={}",
                sig12(r),
                sig12(row.dose),
                sig12(row.relative_utility)
            )?;
        }
    }
    writeln!(
        out,
        "shifted_model mu_argmax={} hpu_exceptions={} risk_averse_exceptions={}",
        sig12(shifted.mu_argmax),
        shifted.hpu_exceptions(),
        shifted.risk_averse_exceptions()
    )?;
    Ok(())
}

fn adversary(args: &AdversaryArgs) -> CliResult<()> {
    let l = load(&args.m)?;
    let scm = &l.model.scm;
    let x = &l.context;
    let au = ActionUtilities::from_table(scm, &l.model.utility, x)?;
    let j = match &l.model.objective {
        Some(o) => ActionUtilities::from_table(scm, o.table(), x)?,
        None => au.clone(),
    };
    let a0 = default_action(scm, x)?;
    let mut others: Vec<usize> = (0..scm.action_domain_size()).filter(|&a| a != a0).collect();
    if let Some(label) = &args.action {
        let a = scm.action_index(label)?;
        if a == a0 {
            return Err(usage("--action must differ from the default action"));
        }
        others.retain(|&b| b != a);
        others.insert(0, a);
    }
    let a = *others.first().ok_or_else(|| usage("the model has a single action"))?;

    let t3 = utility_tie_witness(&au, a0, a)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "utility_tie default={} action={} expected_utility={},{} expected_harm={},{} harmful={}",
        scm.action_label(a0),
        scm.action_label(a),
        sig12(t3.expected_utility[0]),
        sig12(t3.expected_utility[1]),
        sig12(t3.expected_harm[0]),
        sig12(t3.expected_harm[1]),
        t3.verdict.is_harmful()
    )?;
    if let Some(dir) = &args.m.out {
        fs::create_dir_all(dir)?;
        let s = t3.model.to_scm()?;
        let u = t3.model.lift_table(&s, &au)?;
        save_model(dir.join("utility_tie.json"), &s, &u, Some(&Objective::new(u.clone())))?;
    }

    if others.len() < 2 {
        writeln!(out, "shifted_objective skipped: needs at least three actions")?;
        return Ok(());
    }
    let t4 = shifted_objective_witness(&au, &j, a0, others[0], others[1])?;
    writeln!(
        out,
        "shifted_objective flagged={} perturbed={} phi_plus={} phi_minus={}{}",
        t4.flagged.map_or("none", |t| t.name()),
        scm.action_label(t4.perturbed),
        sig12(t4.phi_plus),
        sig12(t4.phi_minus),
        t4.q.map(|q| format!(" q={}", sig12(q))).unwrap_or_default()
    )?;
    match &args.m.out {
        Some(dir) => {
            let mut w = output(Some(&dir.join("shifted_objective.csv")))?;
            t4.write_csv(&mut w)?;
            w.flush()?;
            for (tag, file) in [
                (ShiftTag::Base, "shifted_base.json"),
                (ShiftTag::Plus, "shifted_plus.json"),
                (ShiftTag::Minus, "shifted_minus.json"),
            ] {
                let (s, u, o) = t4.environment(tag).materialize(&au, &j)?;
                save_model(dir.join(file), &s, &u, Some(&o))?;
            }
        }
        None => t4.write_csv(&mut out)?,
    }
    Ok(())
}

fn write_checks(w: &mut impl Write, checks: &[ReferenceCheck]) -> io::Result<usize> {
    writeln!(w, "check,computed,reference,tolerance,status")?;
    let mut failed = 0;
    for c in checks {
        failed += usize::from(!c.passed());
        writeln!(
            w,
            "{},{},{},{},{}",
            c.name,
            sig12(c.computed),
            sig12(c.reference),
            sig12(c.tolerance),
            if c.passed() { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(failed)
}

fn zoo(args: &ZooArgs) -> CliResult<()> {
    let checks = match args.name {
        ZooModel::Treatment => treatment_checks()?,
        ZooModel::Assistant => assistant_checks()?,
        ZooModel::Preemption => preemption_checks()?,
    };
    let mut out = io::stdout().lock();
    let failed = write_checks(&mut out, &checks)?;
    if let ZooModel::Assistant = args.name {
        let spec = AssistantSpec::default();
        for (name, agent) in [
            ("agent1", Agent::ExpectedReturn),
            ("agent2 lambda=0.001", Agent::RiskAverse(0.001)),
            ("agent2 lambda=0.01", Agent::RiskAverse(0.01)),
            ("agent3 lambda=5", Agent::HarmAverse(5.0)),
            ("agent3 lambda=20", Agent::HarmAverse(20.0)),
        ] {
            let d = spec.decide(agent)?;
            writeln!(out, "# {name}: {:?}, expected return {}", d.action, sig12(d.expected_return))?;
        }
    }
    if let Some(path) = &args.out {
        let (scm, util) = match args.name {
            ZooModel::Treatment => treatment_model(),
            ZooModel::Preemption => preemption_model(),
            ZooModel::Assistant => return Err(usage("the assistant is a continuous model with no model file")),
        };
        save_model(path, &scm, &util, None)?;
    }
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> CliResult<()> {
    let cfg = VerifyConfig {
        seed: args.seed,
        mc_samples: args.samples,
        ..VerifyConfig::default()
    };
    let checks = run_verification(&cfg);
    let mut out = io::stdout().lock();
    writeln!(out, "# seed={}", cfg.seed)?;
    writeln!(out, "# generator={RNG_NAME}")?;
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} passed, {failed} failed", checks.len() - failed)?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HARMCALC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("HARMCALC_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(e.to_string()))
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Harm(a) => harm(a),
        Command::Expected(a) => expected(a),
        Command::Policy(a) => policy(a),
        Command::Cate(a) => cate(a),
        Command::Pn(a) => pn(a),
        Command::Dose(a) => dose(a),
        Command::Adversary(a) => adversary(a),
        Command::Zoo(a) => zoo(a),
        Command::Verify(a) => verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("harmcalc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
