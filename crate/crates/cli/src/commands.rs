use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use spdelab::appendix_verifier::{verify_all, SweepGrid, VerifierOptions};
use spdelab::ensemble::EnsembleOutput;
use spdelab::ensemble_stats::{rate_fit, std_normal_pdf, RateFit};

use crate::config::RunConfig;
use crate::experiments::{self, fit, LadderRow, Setup, SteinRow};
use crate::manifest::{write_csv, RunManifest, MAX_ABORT_FRACTION};

/// Outcome of one subcommand: the manifest and the directory it was written to.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// human-readable progress lines, printed by the binary
    pub log: Vec<String>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        !self.manifest.failed()
    }
}

fn open(cfg: &RunConfig, command: &str) -> Result<(PathBuf, RunManifest)> {
    let dir = cfg.run_dir(command);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok((dir, RunManifest::start(command, cfg)))
}

fn record_aborts(m: &mut RunManifest, out: &EnsembleOutput) {
    m.aborted_replicas = out.aborted;
    m.total_replicas = out.replicas;
    if out.abort_fraction() > MAX_ABORT_FRACTION {
        m.status = "failed".into();
        m.notes.push(format!(
            "{} of {} replicas aborted (limit {MAX_ABORT_FRACTION}); first: {}",
            out.aborted,
            out.replicas,
            out.first_abort.as_deref().unwrap_or("?")
        ));
    }
}

fn results_csv(cfg: &RunConfig, id: &str, rows: &[LadderRow]) -> String {
    let mut s = String::from("config_id,case,t,R,n_replicas,sample_var,sup_dist,tv_dist\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{id},{},{},{},{},{},{},{}",
            cfg.case.name(),
            cfg.t_end,
            r.r,
            r.n_replicas,
            r.sample_var,
            r.sup_dist,
            r.tv_dist
        );
    }
    s
}

fn variance_csv(cfg: &RunConfig, id: &str, rows: &[LadderRow]) -> String {
    let mut s = String::from("config_id,case,t,R,sample_var,ratio,target,rel_dev\n");
    for r in rows {
        if let Some(v) = &r.variance {
            let _ = writeln!(
                s,
                "{id},{},{},{},{},{},{},{}",
                cfg.case.name(),
                cfg.t_end,
                r.r,
                v.sample_variance,
                v.ratio,
                v.target,
                v.rel_dev
            );
        }
    }
    s
}

fn rates_csv(cfg: &RunConfig, id: &str, fits: &[(&str, Option<RateFit>)]) -> String {
    let mut s = String::from("config_id,case,t,metric,n_points,slope,intercept,slope_stderr\n");
    for (metric, f) in fits {
        match f {
            Some(f) => {
                let _ = writeln!(
                    s,
                    "{id},{},{},{metric},{},{},{},{}",
                    cfg.case.name(),
                    cfg.t_end,
                    f.r_values.len(),
                    f.slope,
                    f.intercept,
                    f.slope_stderr
                );
            }
            None => {
                let _ = writeln!(s, "{id},{},{},{metric},0,NaN,NaN,NaN", cfg.case.name(), cfg.t_end);
            }
        }
    }
    s
}

fn simulate_inner(cfg: &RunConfig, command: &str, strict: bool) -> Result<(PathBuf, RunManifest, Vec<LadderRow>)> {
    let (dir, mut m) = open(cfg, command)?;
    let id = &m.config_hash[..16].to_string();
    let setup: Setup = experiments::setup(cfg)?;
    let out = experiments::run(cfg, &setup, cfg.tangents)?;
    record_aborts(&mut m, &out);
    let rows = experiments::ladder_rows(cfg, &setup, &out, strict)?;
    m.outputs.push(write_csv(&dir, "results.csv", &m.config_hash, &results_csv(cfg, id, &rows))?);
    if rows.iter().any(|r| r.variance.is_some()) {
        m.outputs.push(write_csv(&dir, "variance.csv", &m.config_hash, &variance_csv(cfg, id, &rows))?);
    }
    Ok((dir, m, rows))
}

/// Runs the ensemble for every R and writes `results.csv` (and `variance.csv` when an oracle exists).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    let (dir, mut m, rows) = simulate_inner(cfg, "simulate", false)?;
    let log = rows
        .iter()
        .map(|r| {
            format!(
                "R = {:>6}: n = {}, var = {:.6e}, sup = {:.4e}, tv = {:.4e}",
                r.r, r.n_replicas, r.sample_var, r.sup_dist, r.tv_dist
            )
        })
        .collect();
    m.finish(&dir)?;
    Ok(RunOutcome { dir, manifest: m, log })
}

/// Simulation plus density grids per R and a rate fit of the sup and TV distances.
pub fn cmd_density(cfg: &RunConfig) -> Result<RunOutcome> {
    let (dir, mut m, rows) = simulate_inner(cfg, "density", true)?;
    let id = m.config_hash[..16].to_string();
    for r in &rows {
        if let Some(d) = &r.density {
            let mut s = String::from("x,density,phi\n");
            for (x, f) in d.grid.iter().zip(&d.density) {
                let _ = writeln!(s, "{x},{f},{}", std_normal_pdf(*x));
            }
            m.outputs.push(write_csv(&dir, &format!("density_R{}.csv", r.r), &m.config_hash, &s)?);
        }
    }
    let sup = fit(rows.iter().map(|r| (r.r, r.sup_dist)));
    let tv = fit(rows.iter().map(|r| (r.r, r.tv_dist)));
    let log = sup
        .iter()
        .map(|f| format!("sup-distance slope {:.4} ± {:.4}", f.slope, f.slope_stderr))
        .collect();
    m.outputs.push(write_csv(&dir, "rates.csv", &m.config_hash, &rates_csv(cfg, &id, &[("sup_dist", sup), ("tv_dist", tv)]))?);
    m.finish(&dir)?;
    Ok(RunOutcome { dir, manifest: m, log })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NaN".into())
}

fn stein_csv(cfg: &RunConfig, id: &str, rows: &[SteinRow]) -> String {
    let mut s = String::from(
        "config_id,case,t,R,n,norm_f_4,norm_inv_dvf_4_raw,norm_inv_dvf_4_winsorized,norm_one_minus_dvf_2,\
         norm_dvdvf_2,rhs_stein_raw,rhs_stein_winsorized,nonpositive,inverse_valid,negative_fraction,sup_dist,lhs_le_1_5_rhs\n",
    );
    for r in rows {
        let g = &r.ingredients;
        let _ = writeln!(
            s,
            "{id},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            cfg.case.name(),
            cfg.t_end,
            r.r,
            g.n,
            g.norm_f_4,
            g.norm_inv_dvf_4_raw,
            g.norm_inv_dvf_4_winsorized,
            g.norm_one_minus_dvf_2,
            opt(g.norm_dvdvf_2),
            opt(g.rhs_stein_raw),
            opt(g.rhs_stein_winsorized),
            g.nonpositive,
            g.inverse_valid,
            r.negative_fraction,
            r.sup_dist,
            r.consistent().map(|b| b.to_string()).unwrap_or_else(|| "NA".into())
        );
    }
    s
}

/// Tangent-augmented ensemble: the four Stein norms, the assembled bound and the measured distance per R.
pub fn cmd_stein(cfg: &RunConfig) -> Result<RunOutcome> {
    let (dir, mut m) = open(cfg, "stein")?;
    let id = m.config_hash[..16].to_string();
    let setup = experiments::setup(cfg)?;
    let out = experiments::run(cfg, &setup, true)?;
    record_aborts(&mut m, &out);
    let rows = experiments::stein_rows(cfg, &setup, &out)?;
    let mut log = Vec::new();
    for r in &rows {
        if !r.ingredients.inverse_valid {
            m.notes.push(format!("R = {}: inverse moment invalid ({} nonpositive D_vF)", r.r, r.ingredients.nonpositive));
        }
        log.push(format!(
            "R = {:>6}: sup = {:.4e}, rhs = {}, ‖1−D_vF‖₂ = {:.4e}",
            r.r,
            r.sup_dist,
            opt(r.rhs()),
            r.ingredients.norm_one_minus_dvf_2
        ));
    }
    m.outputs.push(write_csv(&dir, "stein.csv", &m.config_hash, &stein_csv(cfg, &id, &rows))?);
    let om = fit(rows.iter().map(|r| (r.r, r.ingredients.norm_one_minus_dvf_2)));
    let sup = fit(rows.iter().map(|r| (r.r, r.sup_dist)));
    m.outputs.push(write_csv(
        &dir,
        "stein_rates.csv",
        &m.config_hash,
        &rates_csv(cfg, &id, &[("norm_one_minus_dvf_2", om), ("sup_dist", sup)]),
    )?);
    m.finish(&dir)?;
    Ok(RunOutcome { dir, manifest: m, log })
}

/// Runs every appendix check; the manifest is marked failed if any report fails.
pub fn cmd_verify(cfg: &RunConfig) -> Result<RunOutcome> {
    let (dir, mut m) = open(cfg, "verify")?;
    let mut sweep = if cfg.sweep == "small" {
        SweepGrid::small()
    } else {
        SweepGrid::default()
    };
    sweep.seed = cfg.seed;
    let opts = VerifierOptions {
        phi_scale: cfg.phi_scale,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let reports = pool.install(|| verify_all(&sweep, &opts))?;
    let mut log = Vec::new();
    for r in &reports {
        log.push(r.summary_line());
        m.outputs.push(write_csv(&dir, &format!("verify_{}.csv", r.lemma), &m.config_hash, &r.to_csv())?);
        if !r.passed() {
            m.status = "failed".into();
            m.notes.push(r.summary_line());
        }
    }
    m.finish(&dir)?;
    Ok(RunOutcome { dir, manifest: m, log })
}

/// Re-fits `column` against the `R` column of an existing results CSV and writes
/// `rates_<column>.csv` beside it.
pub fn cmd_rates(input: &Path, column: &str) -> Result<(PathBuf, RateFit)> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut hash = String::from("unknown");
    let mut lines = text.lines().filter(|l| {
        if let Some(h) = l.strip_prefix("# config_hash=") {
            hash = h.to_string();
        }
        !l.starts_with('#') && !l.trim().is_empty()
    });
    let header: Vec<&str> = lines.next().context("empty CSV")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let Some(ri) = col("R") else { bail!("no R column in {}", input.display()) };
    let Some(ci) = col(column) else { bail!("no column '{column}' in {}", input.display()) };
    let mut pts = Vec::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let r: f64 = f.get(ri).context("short row")?.parse()?;
        let v: f64 = f.get(ci).context("short row")?.parse()?;
        pts.push((r, v));
    }
    let rf = rate_fit(&pts)?;
    let mut body = String::from("metric,n_points,slope,intercept,slope_stderr\n");
    let _ = writeln!(body, "{column},{},{},{},{}", pts.len(), rf.slope, rf.intercept, rf.slope_stderr);
    let dir = input.parent().unwrap_or(Path::new("."));
    let name = format!("rates_{column}.csv");
    write_csv(dir, &name, &hash, &body)?;
    Ok((dir.join(name), rf))
}
