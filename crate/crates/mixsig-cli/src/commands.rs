//! Subcommand implementations. Each writes its outputs and a manifest into the output
//! directory and returns the lines to print.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mixsig::counterfactual::{
    expected_revenue_first_price, expected_revenue_second_price, revenue_from_primitives, RevenueReport,
};
use mixsig::field::{
    empirical_field, rank_condition_report, strategy_condition_tests, AuctionField, OracleField, OracleValuation,
    RankOptions, RankReport, RankStatus, StrategyConditionReport,
};
use mixsig::identify::{default_points, detect_active_set, identify, IdentifiedPrimitives, Route};
use mixsig::model::assumptions::{check_assumptions, GridSpec};
use mixsig::model::{Combiner, CombinerKind, Covariates, MixedSignalModel};
use mixsig::numerics::linspace;
use mixsig::sieve::{design_grid, estimate_u_hat, fit, initial_state, FitResult};
use mixsig::strategy::{simulate_bids, solve_symmetric_fpa, BidDataset, SolveOptions};

use crate::config::{points, Primitives, RevenueSource, RunConfig};
use crate::error::CliError;
use crate::manifest::{sha256_hex, Manifest, OutputFile};
use crate::table::{dataset_table, num, read_dataset, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Field,
    Identify,
    Estimate,
    Counterfactual,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Field => "field",
            Command::Identify => "identify",
            Command::Estimate => "estimate",
            Command::Counterfactual => "counterfactual",
            Command::Diagnose => "diagnose",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Command::Simulate, Command::Field, Command::Identify, Command::Estimate, Command::Counterfactual, Command::Diagnose]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_text: String,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub grid_alpha: Option<usize>,
    pub grid_z: Option<usize>,
    pub route: Option<Route>,
    pub force: bool,
    pub diagnose_only: bool,
    pub threads: Option<usize>,
}

impl Invocation {
    /// Rebuild a run from its manifest, writing to `out`.
    pub fn from_manifest(m: &Manifest, out: PathBuf) -> Result<Self, CliError> {
        let command = Command::from_name(&m.subcommand)
            .ok_or_else(|| CliError::config(format!("manifest names unknown subcommand {:?}", m.subcommand)))?;
        if sha256_hex(m.config.as_bytes()) != m.config_sha256 {
            return Err(CliError::config("manifest config text does not match its hash"));
        }
        if let (Some(p), Some(h)) = (&m.data, &m.data_sha256) {
            let bytes = fs::read(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            if &sha256_hex(&bytes) != h {
                return Err(CliError::config(format!("{} changed since the manifest was written", p.display())));
            }
        }
        let route = match m.route.as_deref() {
            None => None,
            Some("terminal") => Some(Route::Terminal),
            Some("initial") => Some(Route::Initial),
            Some(r) => return Err(CliError::config(format!("manifest route {r:?} is unknown"))),
        };
        Ok(Self {
            command,
            config_text: m.config.clone(),
            data: m.data.clone(),
            out,
            seed: Some(m.seed),
            grid_alpha: m.grid_alpha,
            grid_z: m.grid_z,
            route,
            force: m.force,
            diagnose_only: m.diagnose_only,
            threads: m.threads,
        })
    }
}

struct Ctx<'a> {
    inv: &'a Invocation,
    cfg: RunConfig,
    outputs: Vec<OutputFile>,
    lines: Vec<String>,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.inv.seed.unwrap_or(self.cfg.seed)
    }

    fn per_axis(&self) -> usize {
        self.inv.grid_z.unwrap_or(3)
    }

    fn save(&mut self, file: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.inv.out.join(file), bytes)?;
        self.outputs.push(OutputFile { file: file.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn save_table(&mut self, file: &str, t: &Table) -> Result<(), CliError> {
        let bytes = t.to_bytes()?;
        self.save(file, &bytes)
    }

    fn save_json<T: serde::Serialize>(&mut self, file: &str, v: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(v).map_err(|e| CliError::numerical(format!("json: {e}")))?;
        self.save(file, (text + "\n").as_bytes())
    }

    fn dataset(&self) -> Result<Option<BidDataset>, CliError> {
        self.inv.data.as_deref().map(read_dataset).transpose()
    }

    /// Empirical field when a dataset is given, the oracle field otherwise.
    fn field(&self, bidder: usize, zs_hint: Option<&[Covariates]>) -> Result<Box<dyn AuctionField>, CliError> {
        if bidder == 0 {
            return Err(CliError::config("bidder indices are 1-based"));
        }
        let i = bidder - 1;
        if let Some(data) = self.dataset()? {
            if i >= data.n {
                return Err(CliError::config(format!("bidder {bidder} is not in the dataset")));
            }
            return Ok(Box::new(empirical_field(&data, i, &self.cfg.smoother)?));
        }
        let prims = self.cfg.primitives()?;
        let support = match self.cfg.covariates.as_ref() {
            Some(c) => c.finite_support(prims.n(), prims.dim())?,
            None => zs_hint.map(|z| z.to_vec()),
        };
        let profile = self.cfg.profile_section()?.build(&prims, support.as_deref(), &SolveOptions::default())?;
        let valuation = match prims {
            Primitives::Model(m) => OracleValuation::Model(m),
            Primitives::Wilson(w) => OracleValuation::Wilson(w),
        };
        Ok(Box::new(OracleField::new(valuation, profile, i)?))
    }

    /// Shape (n, D) from the dataset or the model.
    fn shape(&self) -> Result<(usize, usize), CliError> {
        if let Some(data) = self.dataset()? {
            return Ok((data.n, data.dim));
        }
        let p = self.cfg.primitives()?;
        Ok((p.n(), p.dim()))
    }

    /// Explicit points, else the covariate section's grid, else `fallback`.
    fn zs(&self, explicit: Option<&Vec<Vec<f64>>>, fallback: impl FnOnce(usize, usize) -> Vec<Covariates>) -> Result<Vec<Covariates>, CliError> {
        let (n, dim) = self.shape()?;
        if let Some(p) = explicit {
            return points(n, dim, p);
        }
        match &self.cfg.covariates {
            Some(c) => c.grid(n, dim, self.per_axis()),
            None => Ok(fallback(n, dim)),
        }
    }
}

fn z_header(n: usize, dim: usize) -> Vec<String> {
    (1..=n).flat_map(|j| (1..=dim).map(move |d| format!("z_{j}_{d}"))).collect()
}

fn z_cells(z: &Covariates) -> Vec<String> {
    z.values().iter().map(|v| num(*v)).collect()
}

/// Run one subcommand; the manifest is written whether or not it succeeds.
pub fn run(inv: &Invocation) -> Result<Vec<String>, CliError> {
    let start = Instant::now();
    fs::create_dir_all(&inv.out)?;
    let cfg = RunConfig::parse(&inv.config_text)?;
    let mut ctx = Ctx { inv, cfg, outputs: Vec::new(), lines: Vec::new() };
    let result = match inv.command {
        Command::Simulate => simulate(&mut ctx),
        Command::Field => field_export(&mut ctx),
        Command::Identify => identify_cmd(&mut ctx),
        Command::Estimate => estimate(&mut ctx),
        Command::Counterfactual => counterfactual(&mut ctx),
        Command::Diagnose => diagnose(&mut ctx),
    };
    if let Err(e) = &result {
        let text = serde_json::to_string_pretty(e).unwrap_or_else(|_| e.message.clone());
        ctx.save("error.json", (text + "\n").as_bytes())?;
    }
    let data_sha256 = match &inv.data {
        Some(p) => Some(sha256_hex(&fs::read(p)?)),
        None => None,
    };
    let manifest = Manifest {
        tool: "mixsig".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        library_version: mixsig::VERSION.into(),
        subcommand: inv.command.name().into(),
        status: match &result {
            Ok(()) => "ok".into(),
            Err(e) => serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        },
        config_sha256: sha256_hex(inv.config_text.as_bytes()),
        config: inv.config_text.clone(),
        data: inv.data.as_ref().map(|p| fs::canonicalize(p).unwrap_or_else(|_| p.clone())),
        data_sha256,
        seed: ctx.seed(),
        grid_alpha: inv.grid_alpha,
        grid_z: inv.grid_z,
        route: inv.route.map(|r| match r {
            Route::Terminal => "terminal".into(),
            Route::Initial => "initial".into(),
        }),
        force: inv.force,
        diagnose_only: inv.diagnose_only,
        threads: inv.threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs.clone(),
    };
    manifest.write(&inv.out)?;
    result.map(|_| ctx.lines)
}

fn simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    if ctx.inv.data.is_some() {
        return Err(CliError::config("simulate takes a model, not a dataset"));
    }
    let prims = ctx.cfg.primitives()?;
    let model = prims.model().ok_or_else(|| CliError::config("simulation needs a copula model"))?;
    let (n, dim) = (model.n(), model.dim());
    let cov = ctx.cfg.covariate_section()?.clone();
    let grid = GridSpec::uniform(ctx.inv.grid_alpha.unwrap_or(21), cov.grid(n, dim, ctx.per_axis())?);
    let report = check_assumptions(model, &grid);
    let rendered = report.render();
    ctx.save("assumptions.txt", rendered.as_bytes())?;
    if !report.all_passed() && !ctx.inv.force {
        return Err(CliError::config("model assumptions fail (use --force to simulate anyway)").with_report(rendered));
    }
    let opts = SolveOptions::default();
    let support = cov.finite_support(n, dim)?;
    let profile = ctx.cfg.profile_section()?.build(&prims, support.as_deref(), &opts)?;
    let auctions = ctx.cfg.simulate.auctions;
    let sim = simulate_bids(model, &profile, &cov.sampler(n, dim)?, auctions, ctx.seed(), &opts)?;
    ctx.save_table("bids.csv", &dataset_table(&sim.data))?;
    if ctx.cfg.simulate.write_signals {
        let mut header = vec!["auction_id".to_string()];
        header.extend((1..=n).map(|j| format!("a_{j}")));
        let mut t = Table::with_header("signals", header);
        for (k, a) in sim.signals.iter().enumerate() {
            let mut row = vec![sim.data.records[k * n].auction_id.to_string()];
            row.extend(a.iter().map(|v| num(*v)));
            t.push(row);
        }
        ctx.save_table("signals.csv", &t)?;
    }
    ctx.lines.push(format!("simulated {auctions} auctions with {n} bidders ({} rows)", sim.data.records.len()));
    Ok(())
}

fn field_export(ctx: &mut Ctx) -> Result<(), CliError> {
    let bidder = ctx.cfg.field.bidder.unwrap_or(1);
    let zs = ctx.zs(ctx.cfg.field.points.as_ref(), default_points)?;
    let field = ctx.field(bidder, Some(&zs))?;
    let (n, dim) = (field.n(), field.dim());
    let m = ctx.inv.grid_alpha.unwrap_or(21);
    if m < 2 {
        return Err(CliError::config("--grid-alpha needs at least 2 points"));
    }
    let alphas: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
    let mut header = vec!["alpha".to_string()];
    header.extend(z_header(n, dim));
    header.push("value".into());

    type Accessor<'a> = Box<dyn Fn(f64, &Covariates) -> mixsig::Result<f64> + 'a>;
    let mut accessors: Vec<(String, Accessor)> = vec![
        ("u".into(), Box::new(|a, z| field.u(a, z))),
        ("omega".into(), Box::new(|a, z| field.omega(a, z))),
    ];
    for j in 0..n {
        let f = &field;
        accessors.push((format!("bid_{}", j + 1), Box::new(move |a, z| f.bid(j, a, z))));
        accessors.push((format!("gb_{}", j + 1), Box::new(move |a, z| f.gb(j, a, z))));
    }
    if n >= 3 {
        accessors.push(("w".into(), Box::new(|a, z| field.w(a, z))));
    }
    for (name, f) in &accessors {
        let mut t = Table::with_header(&format!("field_{name}"), header.clone());
        let mut skipped = false;
        'grid: for z in &zs {
            for &a in &alphas {
                match f(a, z) {
                    Ok(v) => {
                        let mut row = vec![num(a)];
                        row.extend(z_cells(z));
                        row.push(num(v));
                        t.push(row);
                    }
                    Err(mixsig::Error::Unsupported(_)) => {
                        skipped = true;
                        break 'grid;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if skipped {
            ctx.lines.push(format!("field_{name}: not available for this field"));
            continue;
        }
        ctx.save_table(&format!("field_{name}.csv"), &t)?;
        ctx.lines.push(format!("field_{name}.csv: {} rows", t.rows.len()));
    }
    Ok(())
}

struct Diagnostics {
    text: String,
    passed: bool,
    rank: Option<RankReport>,
    strategy: StrategyConditionReport,
}

fn run_diagnostics(ctx: &mut Ctx, field: &dyn AuctionField, zs: &[Covariates], route: Route) -> Result<Diagnostics, CliError> {
    let mut entries: Vec<(Option<bool>, String)> = Vec::new();
    let mut line = |ok: bool, s: String| entries.push((Some(ok), s));
    if ctx.inv.data.is_none() {
        if let Some(model) = ctx.cfg.primitives()?.model() {
            let grid = GridSpec::uniform(ctx.inv.grid_alpha.unwrap_or(21), zs.to_vec());
            let rep = check_assumptions(model, &grid);
            for e in &rep.entries {
                line(e.passed, format!("assumption {}: {}", e.name, e.detail));
            }
        }
    }
    let tol = ctx.cfg.identify.support_tolerance;
    let strategy = strategy_condition_tests(field, zs, tol)?;
    let need = match route {
        Route::Terminal => strategy.common_upper(),
        Route::Initial => strategy.common_lower(),
    };
    line(
        need,
        format!(
            "strategy conditions for the {} route: common upper bid {}, common lower bid {}",
            if route == Route::Terminal { "terminal" } else { "initial" },
            strategy.common_upper(),
            strategy.common_lower()
        ),
    );
    let i = field.bidder();
    let active = detect_active_set(field, route, zs, ctx.cfg.identify.options.active_tolerance)?;
    entries.push((None, format!("active set: {:?}", active.iter().map(|j| j + 1).collect::<Vec<_>>())));
    let candidate: Vec<usize> = active.iter().cloned().filter(|&j| j != i).collect();
    let mut line = |ok: bool, s: String| entries.push((Some(ok), s));
    let rank = if candidate.is_empty() {
        line(true, "rank condition: not binding (private-value combiner)".into());
        None
    } else {
        let m = ctx.inv.grid_alpha.unwrap_or(9).max(2);
        let alphas = linspace(0.1, 0.9, m);
        let rep = rank_condition_report(field, &candidate, Some(&active), &alphas, zs, &RankOptions::default())?;
        let ok = rep.status != RankStatus::Fail;
        let detail = match rep.first_failure() {
            Some(p) => format!("first failure at alpha = {}, Z = {:?}", p.alpha, p.z),
            None => "all points pass".into(),
        };
        line(ok, format!("rank condition: smallest singular value {:.3e}; {detail}", rep.min_singular_value));
        Some(rep)
    };
    let passed = entries.iter().all(|(ok, _)| ok.unwrap_or(true));
    let mut text: String = entries
        .iter()
        .map(|(ok, s)| match ok {
            Some(true) => format!("PASS {s}"),
            Some(false) => format!("FAIL {s}"),
            None => format!("INFO {s}"),
        })
        .collect::<Vec<_>>()
        .join("\n");
    text.push('\n');
    Ok(Diagnostics { text, passed, rank, strategy })
}

fn route_for(ctx: &Ctx, n: usize) -> Route {
    ctx.inv
        .route
        .or(ctx.cfg.identify.options.route)
        .unwrap_or(if n == 2 { Route::Terminal } else { Route::Initial })
}

fn diagnose(ctx: &mut Ctx) -> Result<(), CliError> {
    let sec = ctx.cfg.identify.clone();
    let zs = ctx.zs(sec.points.as_ref(), default_points)?;
    let field = ctx.field(sec.bidder, Some(&zs))?;
    let route = route_for(ctx, field.n());
    let d = run_diagnostics(ctx, &*field, &zs, route)?;
    ctx.save("diagnostics.txt", d.text.as_bytes())?;
    ctx.save_json("rank.json", &d.rank)?;
    ctx.save_json("strategy_conditions.json", &d.strategy)?;
    ctx.lines.extend(d.text.lines().filter(|l| !l.is_empty()).map(String::from));
    if !d.passed {
        return Err(CliError::diagnostic("diagnostics failed").with_report(d.text));
    }
    Ok(())
}

/// Sup errors of the recovered primitives against the normalized generator.
fn generator_errors(model: &MixedSignalModel, prims: &IdentifiedPrimitives) -> Result<Vec<String>, CliError> {
    let norm = model.normalized();
    let i = prims.bidder;
    let mut out = Vec::new();
    for &j in &prims.active {
        let Some(path) = &prims.slopes[j] else { continue };
        let truth = norm.slope(i, j);
        let mut worst = 0.0f64;
        for (k, &a) in prims.alpha.iter().enumerate() {
            if !(0.05..=0.95).contains(&a) {
                continue;
            }
            for (d, v) in path[k].iter().enumerate() {
                worst = worst.max((v - truth.component(d, a)).abs());
            }
        }
        out.push(format!("generator slope error bidder {}: {worst:.3e}", j + 1));
    }
    let phi_err = prims.phi.sup_error(norm.combiner(i))?;
    out.push(format!("generator combiner error: {phi_err:.3e}"));
    Ok(out)
}

fn identify_cmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let sec = ctx.cfg.identify.clone();
    let zs = ctx.zs(sec.points.as_ref(), default_points)?;
    let field = ctx.field(sec.bidder, Some(&zs))?;
    let (n, dim) = (field.n(), field.dim());
    let route = route_for(ctx, n);
    let d = run_diagnostics(ctx, &*field, &zs, route)?;
    ctx.save("diagnostics.txt", d.text.as_bytes())?;
    ctx.lines.extend(d.text.lines().filter(|l| !l.is_empty()).map(String::from));
    if ctx.inv.diagnose_only {
        return Ok(());
    }
    if !d.passed {
        return Err(CliError::diagnostic("diagnostics failed; identification not attempted").with_report(d.text));
    }
    let mut opts = sec.options.clone();
    opts.route = Some(route);
    opts.z_points = Some(zs.clone());
    if let Some(o) = &sec.overid_points {
        opts.overid_points = Some(points(n, dim, o)?);
    }
    if let Some(m) = ctx.inv.grid_alpha {
        if m < 2 {
            return Err(CliError::config("--grid-alpha needs at least 2 points"));
        }
        opts.alpha_points = m;
    }
    let prims = identify(&*field, &opts)?;

    let mut header = vec!["alpha".to_string()];
    let identified: Vec<usize> = (0..n).filter(|&j| prims.slopes[j].is_some()).collect();
    for &j in &identified {
        header.extend((1..=dim).map(|d| format!("gamma_{}_{d}", j + 1)));
    }
    let mut slopes = Table::with_header("slopes", header);
    for (k, &a) in prims.alpha.iter().enumerate() {
        let mut row = vec![num(a)];
        for &j in &identified {
            row.extend(prims.slopes[j].as_ref().unwrap()[k].iter().map(|v| num(*v)));
        }
        slopes.push(row);
    }
    ctx.save_table("slopes.csv", &slopes)?;

    let mut header: Vec<String> = prims.phi.active.iter().map(|j| format!("x_{}", j + 1)).collect();
    header.push("value".into());
    let mut phi = Table::with_header("phi", header);
    for (node, v) in prims.phi.nodes().iter().zip(&prims.phi.values) {
        let mut row: Vec<String> = node.iter().map(|x| num(*x)).collect();
        row.push(num(*v));
        phi.push(row);
    }
    ctx.save_table("phi.csv", &phi)?;
    ctx.save_json("primitives.json", &prims)?;

    let mut summary = vec![
        format!("bidder: {}", prims.bidder + 1),
        format!("route: {:?}", prims.route),
        format!("active set: {:?}", prims.active.iter().map(|j| j + 1).collect::<Vec<_>>()),
        format!("endpoint slopes: {:?}", prims.endpoint_slopes),
        format!("residual: {:.3e}", prims.residual),
        format!("anchor residual: {:.3e}", prims.anchor_residual),
    ];
    match prims.overid_gap {
        Some(g) => summary.push(format!(
            "{} overidentification gap: {g:.3e} (tolerance {:.1e})",
            if g <= 2.0 * opts.tolerance { "PASS" } else { "WARN" },
            2.0 * opts.tolerance
        )),
        None => summary.push("overidentification gap: not computed".into()),
    }
    for w in &prims.warnings {
        summary.push(format!("WARN {w}"));
    }
    if ctx.inv.data.is_none() {
        if let Some(model) = ctx.cfg.primitives()?.model() {
            summary.extend(generator_errors(model, &prims)?);
        }
    }
    summary.push("PASS identification completed".into());
    let text = summary.join("\n") + "\n";
    ctx.save("summary.txt", text.as_bytes())?;
    ctx.lines.extend(summary);
    Ok(())
}

/// Monomials of a combiner with its input scaling folded into the coefficients.
fn combiner_terms(c: &Combiner) -> Option<Vec<(Vec<u32>, f64)>> {
    let n = c.arity();
    let scaled = |powers: &[u32], coef: f64| {
        coef * powers.iter().zip(&c.scale).map(|(&p, s)| s.powi(p as i32)).product::<f64>()
    };
    match &c.kind {
        CombinerKind::Additive { weights, intercept } => {
            let mut out = vec![(vec![0; n], *intercept)];
            for (j, w) in weights.iter().enumerate() {
                let mut p = vec![0; n];
                p[j] = 1;
                out.push((p.clone(), scaled(&p, *w)));
            }
            Some(out)
        }
        CombinerKind::Polynomial { terms, .. } => Some(terms.iter().map(|t| (t.powers.clone(), scaled(&t.powers, t.coef))).collect()),
        _ => None,
    }
}

fn write_fit(ctx: &mut Ctx, fit: &FitResult) -> Result<(), CliError> {
    let n = fit.slopes.len();
    if let Some(terms) = combiner_terms(&fit.phi) {
        let mut header: Vec<String> = (1..=n).map(|j| format!("power_{j}")).collect();
        header.push("coef".into());
        let mut t = Table::with_header("phi_coefficients", header);
        for (p, c) in terms {
            let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            row.push(num(c));
            t.push(row);
        }
        ctx.save_table("phi_coefficients.csv", &t)?;
    }
    let mut t = Table::new("slope_coefficients", &["bidder", "component", "index", "coef"]);
    for (j, s) in fit.slopes.iter().enumerate() {
        let Some(s) = s else { continue };
        for (d, cs) in s.coefs().iter().enumerate() {
            for (k, c) in cs.iter().enumerate() {
                t.push(vec![(j + 1).to_string(), (d + 1).to_string(), k.to_string(), num(*c)]);
            }
        }
    }
    ctx.save_table("slope_coefficients.csv", &t)?;
    let mut log = Table::new("iterations", &["iteration", "objective", "segment", "event"]);
    for (k, obj) in fit.objective.iter().enumerate() {
        let seg = fit.segment_starts.iter().filter(|&&s| s <= k).count() - 1;
        let event = match fit.segment_starts.iter().position(|&s| s == k) {
            Some(s) if s > 0 => fit.drops.get(s - 1).map(|d| format!("drop bidder {}", d.bidder + 1)).unwrap_or_default(),
            _ => String::new(),
        };
        log.push(vec![k.to_string(), num(*obj), seg.to_string(), event]);
    }
    ctx.save_table("iterations.csv", &log)?;
    ctx.save_json("fit.json", fit)?;
    Ok(())
}

fn estimate(ctx: &mut Ctx) -> Result<(), CliError> {
    let sec = ctx.cfg.estimate.clone();
    let (n, dim) = ctx.shape()?;
    if n != 2 {
        return Err(CliError::config("the sieve estimator handles two bidders"));
    }
    let per_axis = ctx.inv.grid_z.unwrap_or(sec.design_per_axis);
    let zs = design_grid(n, dim, sec.design_lo, sec.design_hi, per_axis)?;
    let field = ctx.field(sec.bidder, Some(&zs))?;
    let alpha_points = ctx.inv.grid_alpha.unwrap_or(sec.alpha_points);
    let table = estimate_u_hat(&*field, alpha_points, &zs)?;
    let init = initial_state(&sec.sieve, dim, &[None, None])?;
    let result = fit(&table, &sec.sieve, init, Some(&*field))?;
    write_fit(ctx, &result)?;
    let summary = vec![
        format!("design points: {}, alpha levels: {}", zs.len(), alpha_points),
        format!("iterations: {}", result.iterations),
        format!("converged: {}", result.converged),
        format!("final objective: {:.6e}", result.final_objective()),
        format!("largest within-segment increase: {:.3e}", result.max_increase().max(0.0)),
        format!("dropped slopes: {:?}", result.drops.iter().map(|d| d.bidder + 1).collect::<Vec<_>>()),
        format!("ode fallbacks: {}", result.fallbacks.len()),
    ];
    let text = summary.join("\n") + "\n";
    ctx.save("summary.txt", text.as_bytes())?;
    ctx.lines.extend(summary);
    Ok(())
}

fn revenue_rows(path: &Path, n: usize, dim: usize) -> Result<Table, CliError> {
    let mut header: Vec<String> =
        ["format", "n", "copula", "revenue", "std_error", "draws", "seed"].iter().map(|s| s.to_string()).collect();
    header.extend(z_header(n, dim));
    if path.exists() {
        let t = Table::read(path, Some("revenue"))?;
        if t.header == header {
            return Ok(t);
        }
        return Err(CliError::config(format!("{} has a different layout; choose another --out", path.display())));
    }
    Ok(Table::with_header("revenue", header))
}

fn counterfactual(ctx: &mut Ctx) -> Result<(), CliError> {
    if ctx.inv.data.is_some() {
        return Err(CliError::config("counterfactual works from the model configuration, not a dataset"));
    }
    let sec = ctx.cfg.counterfactual.clone();
    let prims = ctx.cfg.primitives()?;
    let model = prims.model().ok_or_else(|| CliError::config("counterfactuals need a copula model"))?.clone();
    let (n, dim) = (model.n(), model.dim());
    let zs = ctx.zs(sec.points.as_ref(), |n, dim| vec![Covariates::new(n, dim, vec![1.0; n * dim]).unwrap()])?;
    let seed = ctx.seed();
    let opts = SolveOptions::default();
    let mut reports: Vec<RevenueReport> = Vec::new();
    match sec.source {
        RevenueSource::Model => {
            for z in &zs {
                let (profile, _) = solve_symmetric_fpa(&model, z, &opts)?;
                reports.push(expected_revenue_first_price(&model, &profile, z, sec.draws, seed, &opts)?);
                reports.push(expected_revenue_second_price(&model, z, sec.draws, seed, sec.value_grid)?);
            }
        }
        RevenueSource::Identified => {
            let field = ctx.field(ctx.cfg.identify.bidder, Some(&zs))?;
            let mut opts_id = ctx.cfg.identify.options.clone();
            if let Some(p) = &ctx.cfg.identify.points {
                opts_id.z_points = Some(points(n, dim, p)?);
            }
            let recovered = identify(&*field, &opts_id)?;
            for z in &zs {
                let (f, s) = revenue_from_primitives(&recovered, model.copula(), z, sec.draws, seed, &opts)?;
                reports.push(f);
                reports.push(s);
            }
        }
    }
    let path = ctx.inv.out.join("revenue.csv");
    let mut t = revenue_rows(&path, n, dim)?;
    let copula = serde_json::to_string(model.copula().kind()).unwrap_or_default();
    for r in &reports {
        let mut row = vec![
            r.format.tag().to_string(),
            r.n.to_string(),
            copula.clone(),
            num(r.revenue),
            num(r.std_error),
            r.draws.to_string(),
            r.seed.to_string(),
        ];
        row.extend(r.z.iter().map(|v| num(*v)));
        t.push(row);
        ctx.lines.push(format!(
            "{} revenue {:.6} (se {:.2e}) at Z = {:?}",
            r.format.tag(),
            r.revenue,
            r.std_error,
            r.z
        ));
    }
    ctx.save_table("revenue.csv", &t)?;
    Ok(())
}
