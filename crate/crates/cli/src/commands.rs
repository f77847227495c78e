//! Subcommands, registered by name.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use ismq_core::antichain::{self, AnchorRule, AntichainRecord, BuildOptions};
use ismq_core::antichain2::{self, CaseTwoOptions, CaseTwoRecord};
use ismq_core::dims::{self, Crossing, PredictedOrder, XiOptions, XiReport};
use ismq_core::model::{Case, Point};
use ismq_core::numeric::derive_seed;
use ismq_core::quantizer::{self, fit_order, OptimizeOptions, OrderPoint};
use ismq_core::registry::{Named, Registry};
use ismq_core::solver::root_solvers;

use crate::config::Resolved;
use crate::error::CliError;
use crate::table::{float, text, Table};
use crate::verify;

/// Shown whenever a Case (ii) construction runs.
pub const CASE_TWO_NOTICE: &str = "case ii: Γ thresholds compare p_σ·s_σ^r (outer ratios) \
against π̲^k; the reading with inner ratios c is not used";

pub struct Context {
    pub cfg: Resolved,
    pub out: PathBuf,
    pub tables: Vec<Table>,
    pub checks: Vec<verify::Check>,
    pub notes: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub summary: Vec<String>,
    crossing: Option<Crossing>,
    crossing_done: bool,
    notice_shown: bool,
}

impl Context {
    pub fn new(cfg: Resolved, out: PathBuf) -> Self {
        let notes = cfg.notes.clone();
        Self {
            cfg,
            out,
            tables: Vec::new(),
            checks: Vec::new(),
            notes,
            seeds: BTreeMap::new(),
            summary: Vec::new(),
            crossing: None,
            crossing_done: false,
            notice_shown: false,
        }
    }

    pub fn xi_options(&self) -> XiOptions {
        XiOptions {
            solver: root_solvers()
                .get(&self.cfg.raw.solver)
                .expect("solver name validated"),
            ..Default::default()
        }
    }

    pub fn classify(&self, r: f64) -> Result<XiReport, CliError> {
        Ok(dims::classify_with(
            &self.cfg.system,
            r,
            &self.xi_options(),
        )?)
    }

    /// The crossing order, searched once and only when configured.
    pub fn crossing(&mut self) -> Result<Option<Crossing>, CliError> {
        if !self.crossing_done {
            self.crossing_done = true;
            if let Some(c) = self.cfg.raw.crossing {
                let opts = self.xi_options();
                self.crossing = Some(dims::find_crossing_r_with(
                    &self.cfg.system,
                    c.r_lo,
                    c.r_hi,
                    &opts,
                )?);
            }
        }
        Ok(self.crossing)
    }

    /// `r_list` followed by the crossing order, if any.
    pub fn orders(&mut self) -> Result<Vec<f64>, CliError> {
        let mut rs = self.cfg.r_list.clone();
        if let Some(c) = self.crossing()? {
            rs.push(c.r);
        }
        Ok(rs)
    }

    pub fn case_two(&mut self) -> bool {
        let two = self.cfg.system.case() == Case::II;
        if two && !self.notice_shown {
            self.notice_shown = true;
            eprintln!("note: {CASE_TWO_NOTICE}");
            self.notes.push(CASE_TWO_NOTICE.to_string());
        }
        two
    }

    pub fn build_options(&self, keep_words: bool) -> BuildOptions {
        BuildOptions {
            cap: self.cfg.raw.cap,
            keep_words,
        }
    }

    pub fn case_two_options(&self) -> CaseTwoOptions {
        CaseTwoOptions {
            cap: self.cfg.raw.cap,
            psi_h0: self.cfg.raw.psi_h0,
        }
    }

    pub fn lambda(
        &self,
        k: f64,
        xi: &XiReport,
        keep_words: bool,
    ) -> Result<AntichainRecord, CliError> {
        Ok(antichain::build_lambda_at(
            &self.cfg.system,
            k,
            xi,
            &self.build_options(keep_words),
        )?)
    }

    pub fn lambda_tilde(&self, k: f64, xi: &XiReport) -> Result<CaseTwoRecord, CliError> {
        Ok(antichain2::lambda_tilde_with(
            &self.cfg.system,
            k,
            xi,
            &self.cfg.raw.route,
            &self.case_two_options(),
        )?)
    }

    pub fn optimize_options(&self) -> Result<OptimizeOptions, CliError> {
        Ok(OptimizeOptions::by_name(
            &self.cfg.raw.cell_update,
            &self.cfg.raw.seeding,
        )?)
    }

    fn require_k(&self, what: &str) -> Result<(), CliError> {
        if self.cfg.k_list.is_empty() {
            return Err(CliError::Config(format!(
                "`{what}` needs a non-empty `k_list`"
            )));
        }
        Ok(())
    }

    fn require_r(&mut self, what: &str) -> Result<(), CliError> {
        if self.orders()?.is_empty() {
            return Err(CliError::Config(format!(
                "`{what}` needs `r_list` or `crossing`"
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, table: Table) {
        self.tables.retain(|t| t.name() != table.name());
        self.tables.push(table);
    }
}

pub trait Command: Named + Send + Sync {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError>;
}

pub fn commands() -> Registry<dyn Command> {
    let mut reg: Registry<dyn Command> = Registry::new();
    reg.register(Arc::new(DimsCommand));
    reg.register(Arc::new(AntichainCommand));
    reg.register(Arc::new(BoundsCommand));
    reg.register(Arc::new(EmpiricalCommand));
    reg.register(Arc::new(VerifyCommand));
    reg.register(Arc::new(ReportCommand));
    reg
}

fn order_columns(xi: &XiReport) -> [String; 3] {
    match xi.predicted_order {
        PredictedOrder::PurePower { exponent } => [float(exponent), float(0.0), float(0.0)],
        PredictedOrder::LogCorrected {
            exponent,
            log_lower,
            log_upper,
        } => [float(exponent), float(log_lower), float(log_upper)],
    }
}

pub struct DimsCommand;

impl Named for DimsCommand {
    fn name(&self) -> &'static str {
        "dims"
    }
}

impl Command for DimsCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        let mut t = Table::new(
            "dims.csv",
            &[
                "r",
                "xi1",
                "xi2",
                "xi_r",
                "regime",
                "predicted_order",
                "exponent",
                "log_lower",
                "log_upper",
            ],
        );
        for r in ctx.orders()? {
            let xi = ctx.classify(r)?;
            let [e, lo, hi] = order_columns(&xi);
            t.row(vec![
                float(r),
                float(xi.xi1),
                float(xi.xi2),
                float(xi.xi_r),
                xi.regime.label().into(),
                xi.predicted_order.label().into(),
                e,
                lo,
                hi,
            ]);
        }
        ctx.summary.push(format!("dims: {} orders", t.rows()));
        ctx.push(t);
        if let Some(c) = ctx.crossing()? {
            let mut t = Table::new("crossing.csv", &["r_star", "xi1", "xi2", "gap", "regime"]);
            let regime = ctx.classify(c.r)?.regime;
            t.row(vec![
                float(c.r),
                float(c.xi1),
                float(c.xi2),
                float((c.xi1 - c.xi2).abs()),
                regime.label().into(),
            ]);
            ctx.summary
                .push(format!("crossing at r* = {:.10}, ξ = {:.10}", c.r, c.xi1));
            ctx.push(t);
        }
        Ok(())
    }
}

pub struct AntichainCommand;

impl Named for AntichainCommand {
    fn name(&self) -> &'static str {
        "antichain"
    }
}

impl Command for AntichainCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        ctx.require_k("antichain")?;
        ctx.require_r("antichain")?;
        let orders = ctx.orders()?;
        if ctx.case_two() {
            let mut t = Table::new(
                "lambda_tilde.csv",
                &[
                    "k",
                    "r",
                    "gamma_count",
                    "psi_count",
                    "phi_kr",
                    "lambda_tilde",
                    "l1",
                    "l2",
                    "upper_bound",
                    "patch_count",
                ],
            );
            for &r in &orders {
                let xi = ctx.classify(r)?;
                for &k in &ctx.cfg.k_list {
                    let rec = ctx.lambda_tilde(k, &xi)?;
                    t.row(vec![
                        float(k),
                        float(r),
                        rec.gamma_count.to_string(),
                        rec.psi_count.to_string(),
                        rec.phi_kr.to_string(),
                        float(rec.lambda_tilde),
                        rec.l1.to_string(),
                        rec.l2.to_string(),
                        float(rec.upper_bound),
                        rec.patch_count.to_string(),
                    ]);
                }
            }
            ctx.summary
                .push(format!("antichain: {} case ii records", t.rows()));
            ctx.push(t);
            return Ok(());
        }
        let keep = !ctx.cfg.raw.aggregates_only;
        let mut t = Table::new(
            "lambda_series.csv",
            &["k", "r", "n_kr", "lambda_kr", "upper_bound", "l1", "l2"],
        );
        let mut words = Table::new("antichain_words.csv", &["k", "r", "index", "word"]);
        for &r in &orders {
            let xi = ctx.classify(r)?;
            for &k in &ctx.cfg.k_list {
                let rec = ctx.lambda(k, &xi, keep)?;
                t.row(vec![
                    float(k),
                    float(r),
                    rec.n_kr.to_string(),
                    float(rec.lambda_kr),
                    float(rec.upper_bound),
                    rec.l1.to_string(),
                    rec.l2.to_string(),
                ]);
                if let Some(set) = &rec.words {
                    for (i, w) in set.members().iter().enumerate() {
                        words.row(vec![
                            float(k),
                            float(r),
                            i.to_string(),
                            text(&w.to_string()),
                        ]);
                    }
                }
            }
        }
        ctx.summary
            .push(format!("antichain: {} case i records", t.rows()));
        ctx.push(t);
        if keep {
            ctx.push(words);
        }
        Ok(())
    }
}

/// Antichain size, rigorous upper bound and codebook at one `(k, r)`.
pub struct BoundPoint {
    pub k: f64,
    pub n: usize,
    pub upper_bound: f64,
    pub ln_upper_bound: f64,
    pub codebook: Vec<Point>,
}

pub fn bound_point(ctx: &Context, k: f64, xi: &XiReport) -> Result<BoundPoint, CliError> {
    let sys = &ctx.cfg.system;
    if sys.case() == Case::II {
        let rec = ctx.lambda_tilde(k, xi)?;
        let codebook = antichain2::patch_codebook(sys, k, xi.r, &ctx.case_two_options())?;
        Ok(BoundPoint {
            k,
            n: codebook.len(),
            upper_bound: rec.upper_bound,
            ln_upper_bound: rec.ln_upper_bound,
            codebook,
        })
    } else {
        let rec = ctx.lambda(k, xi, true)?;
        let codebook = antichain::codebook_from_antichain(sys, &rec, AnchorRule::FixedPoint)?;
        Ok(BoundPoint {
            k,
            n: rec.n_kr,
            upper_bound: rec.upper_bound,
            ln_upper_bound: rec.ln_upper_bound,
            codebook,
        })
    }
}

pub struct BoundsCommand;

impl Named for BoundsCommand {
    fn name(&self) -> &'static str {
        "bounds"
    }
}

impl Command for BoundsCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        ctx.require_k("bounds")?;
        ctx.require_r("bounds")?;
        ctx.case_two();
        let mut t = Table::new(
            "bounds.csv",
            &[
                "k",
                "r",
                "n",
                "upper_bound",
                "ln_upper_bound",
                "scaled_upper",
                "regime",
            ],
        );
        let mut cb = Table::new("codebooks.csv", &["k", "r", "index", "x", "y"]);
        for r in ctx.orders()? {
            let xi = ctx.classify(r)?;
            for &k in &ctx.cfg.k_list {
                let b = bound_point(ctx, k, &xi)?;
                let scaled = ((b.n as f64).ln() * r / xi.xi_r + b.ln_upper_bound).exp();
                t.row(vec![
                    float(k),
                    float(r),
                    b.n.to_string(),
                    float(b.upper_bound),
                    float(b.ln_upper_bound),
                    float(scaled),
                    xi.regime.label().into(),
                ]);
                if !ctx.cfg.raw.aggregates_only {
                    for (i, p) in b.codebook.iter().enumerate() {
                        cb.row(vec![
                            float(k),
                            float(r),
                            i.to_string(),
                            float(p[0]),
                            float(p[1]),
                        ]);
                    }
                }
            }
        }
        ctx.summary.push(format!("bounds: {} records", t.rows()));
        ctx.push(t);
        if !ctx.cfg.raw.aggregates_only {
            ctx.push(cb);
        }
        Ok(())
    }
}

pub struct EmpiricalCommand;

impl Named for EmpiricalCommand {
    fn name(&self) -> &'static str {
        "empirical"
    }
}

impl Command for EmpiricalCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        ctx.require_r("empirical")?;
        if ctx.cfg.raw.n_list.is_empty() {
            ctx.require_k("empirical")?;
        }
        ctx.case_two();
        let opts = ctx.optimize_options()?;
        let samples = ctx.cfg.raw.samples;
        let restarts = ctx.cfg.raw.restarts;
        let mut t = Table::new(
            "empirical.csv",
            &["n", "r", "e_r_pow_r", "std_error", "scaled", "source"],
        );
        let mut fits = Table::new(
            "fit.csv",
            &[
                "r",
                "source",
                "model",
                "slope",
                "log_exponent",
                "intercept",
                "r_squared",
                "points",
                "predicted_slope",
            ],
        );
        for (j, r) in ctx.orders()?.into_iter().enumerate() {
            let xi = ctx.classify(r)?;
            let mut upper = Vec::new();
            let (sizes, warm): (Vec<usize>, Vec<Option<Vec<Point>>>) =
                if ctx.cfg.raw.n_list.is_empty() {
                    let mut sizes = Vec::new();
                    let mut warm = Vec::new();
                    for &k in &ctx.cfg.k_list {
                        let b = bound_point(ctx, k, &xi)?;
                        sizes.push(b.n);
                        upper.push((b.n, b.upper_bound));
                        warm.push(ctx.cfg.raw.warm_start.then_some(b.codebook));
                    }
                    (sizes, warm)
                } else {
                    let n = ctx.cfg.raw.n_list.clone();
                    let len = n.len();
                    (n, vec![None; len])
                };
            if let Some(&n) = sizes.iter().find(|&&n| samples < 10 * n) {
                return Err(CliError::Config(format!(
                    "`samples` = {samples} is below 10·n for n = {n}"
                )));
            }
            let seed = derive_seed(ctx.cfg.seed, j as u64);
            ctx.seeds.insert(format!("empirical.r{j}"), seed);
            let curve = quantizer::empirical_curve(
                &ctx.cfg.system,
                r,
                &sizes,
                samples,
                restarts,
                seed,
                &warm,
                &opts,
            )?;
            let mut lloyd = Vec::new();
            for est in &curve {
                t.row(vec![
                    est.n.to_string(),
                    float(r),
                    float(est.e_r_pow_r),
                    float(est.std_error),
                    float(est.scaled(xi.xi_r)),
                    "lloyd".into(),
                ]);
                lloyd.push((est.n, est.e_r_pow_r));
            }
            for &(n, u) in &upper {
                let scaled = (n as f64).powf(r / xi.xi_r) * u;
                t.row(vec![
                    n.to_string(),
                    float(r),
                    float(u),
                    float(0.0),
                    float(scaled),
                    "antichain_upper".into(),
                ]);
            }
            for (source, series) in [("lloyd", &lloyd), ("antichain_upper", &upper)] {
                let points: Vec<OrderPoint> = series
                    .iter()
                    .map(|&(n, e)| OrderPoint::new(n as f64, e))
                    .collect();
                for with_log in [false, true] {
                    match fit_order(&points, with_log) {
                        Ok(f) => fits.row(vec![
                            float(r),
                            source.into(),
                            f.model.label().into(),
                            float(f.slope),
                            float(f.log_exponent),
                            float(f.intercept),
                            float(f.r_squared),
                            f.points.to_string(),
                            float(-r / xi.xi_r),
                        ]),
                        Err(e) if !points.is_empty() => ctx.notes.push(format!(
                            "fit r={r} source={source} log_term={with_log}: {e}"
                        )),
                        Err(_) => {}
                    }
                }
            }
        }
        ctx.summary.push(format!(
            "empirical: {} estimates, {} fits",
            t.rows(),
            fits.rows()
        ));
        ctx.push(t);
        ctx.push(fits);
        Ok(())
    }
}

pub struct VerifyCommand;

impl Named for VerifyCommand {
    fn name(&self) -> &'static str {
        "verify"
    }
}

impl Command for VerifyCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        ctx.case_two();
        let checks = verify::run_suite(ctx)?;
        let mut t = Table::new("verify.csv", &["check", "status", "detail"]);
        for c in &checks {
            t.row(vec![c.name.clone(), c.status().into(), text(&c.detail)]);
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        ctx.summary
            .push(format!("verify: {} checks, {failed} failed", checks.len()));
        ctx.push(t);
        ctx.checks = checks;
        Ok(())
    }
}

pub struct ReportCommand;

impl Named for ReportCommand {
    fn name(&self) -> &'static str {
        "report"
    }
}

impl Command for ReportCommand {
    fn run(&self, ctx: &mut Context) -> Result<(), CliError> {
        DimsCommand.run(ctx)?;
        if !ctx.cfg.k_list.is_empty() {
            AntichainCommand.run(ctx)?;
            BoundsCommand.run(ctx)?;
        }
        EmpiricalCommand.run(ctx)?;
        VerifyCommand.run(ctx)
    }
}

/// `summary.md`: every table of this run, rendered as Markdown.
pub fn summary(ctx: &Context) -> String {
    let mut s = String::from("# ismq run summary\n\n");
    for line in &ctx.summary {
        s.push_str(&format!("- {line}\n"));
    }
    for t in &ctx.tables {
        s.push_str(&format!("\n## {}\n\n", t.name()));
        let mut lines = t.contents().lines();
        let Some(head) = lines.next() else { continue };
        let cols = head.split(',').count();
        s.push_str(&format!("| {} |\n", head.replace(',', " | ")));
        s.push_str(&format!("|{}\n", "---|".repeat(cols)));
        let body: Vec<&str> = lines.collect();
        const MAX_ROWS: usize = 40;
        for line in body.iter().take(MAX_ROWS) {
            s.push_str(&format!("| {} |\n", line.replace(',', " | ")));
        }
        if body.len() > MAX_ROWS {
            s.push_str(&format!(
                "\n{} more rows in {}\n",
                body.len() - MAX_ROWS,
                t.name()
            ));
        }
    }
    s
}
