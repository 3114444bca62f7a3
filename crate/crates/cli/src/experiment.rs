//! Experiment harness: cost ratios per instance and the budget, horizon and
//! grid-density sweeps, written as CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use vrpsa::{build_instance, parse_cvrp, solve_vrpsa, validate, Backend, GenParams, PipelineConfig, VrpSaInstance};

use super::{code, fail, Exit};

/// Generator overrides; unset fields keep the generator defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenOverrides {
    pub gx: Option<usize>,
    pub gy: Option<usize>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub t_factor: Option<f64>,
    pub b_factor: Option<f64>,
    pub fixed_cost: Option<f64>,
    pub layers: Option<usize>,
    pub intervals: Option<usize>,
}

impl GenOverrides {
    fn params(&self) -> GenParams {
        let d = GenParams::default();
        GenParams {
            gx: self.gx.unwrap_or(d.gx),
            gy: self.gy.unwrap_or(d.gy),
            eta1: self.eta1.unwrap_or(d.eta1),
            eta2: self.eta2.unwrap_or(d.eta2),
            t_factor: self.t_factor.unwrap_or(d.t_factor),
            b_factor: self.b_factor.unwrap_or(d.b_factor),
            fixed_cost: self.fixed_cost.unwrap_or(d.fixed_cost),
            layers: self.layers.unwrap_or(d.layers),
            intervals: self.intervals.unwrap_or(d.intervals),
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CVRP benchmark files, relative to the config file.
    pub instances: Vec<PathBuf>,
    #[serde(default)]
    pub gen: GenOverrides,
    #[serde(default = "default_b")]
    pub b_factors: Vec<f64>,
    #[serde(default = "default_t")]
    pub t_factors: Vec<f64>,
    #[serde(default = "default_g")]
    pub grid_sizes: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// External solver command template; the built-in solver when absent.
    #[serde(default)]
    pub solver_cmd: Option<String>,
    /// Seconds per MILP solve.
    #[serde(default = "default_limit")]
    pub time_limit: f64,
}

fn default_b() -> Vec<f64> {
    vec![1.0 / 3.0, 0.5, 2.0 / 3.0]
}

fn default_t() -> Vec<f64> {
    vec![1.0, 1.25, 1.5]
}

fn default_g() -> Vec<usize> {
    vec![3, 5, 7]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_limit() -> f64 {
    10.0
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.instances.is_empty() {
            return Err("no instances".into());
        }
        if self.seeds.is_empty() {
            return Err("no seeds".into());
        }
        if let Some(b) = self.b_factors.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
            return Err(format!("b_factor {b} outside (0, 1]"));
        }
        if let Some(t) = self.t_factors.iter().find(|&&t| !(1.0..=1.5).contains(&t)) {
            return Err(format!("t_factor {t} outside [1, 1.5]"));
        }
        if let Some(g) = self.grid_sizes.iter().find(|&&g| !(1..=10).contains(&g)) {
            return Err(format!("grid size {g} outside 1..=10"));
        }
        if !(self.time_limit > 0.0) {
            return Err("time_limit must be positive".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct RatioRow {
    instance: String,
    seed: u64,
    status: String,
    f1: Option<f64>,
    f2: Option<f64>,
    fp: Option<f64>,
    /// Pipeline with random rebuild order.
    fp_random: Option<f64>,
    f2_f1: Option<f64>,
    fp_f1: Option<f64>,
    fp_random_f1: Option<f64>,
}

#[derive(Serialize)]
struct BtRow {
    b_factor: f64,
    t_factor: f64,
    runs: usize,
    failures: usize,
    mean_fp_f1: Option<f64>,
}

#[derive(Serialize)]
struct GRow {
    g: usize,
    runs: usize,
    failures: usize,
    mean_f1_f2: Option<f64>,
    mean_fp_f2: Option<f64>,
}

struct Run {
    f1: f64,
    f2: f64,
    fp: f64,
}

struct Harness {
    benchmarks: Vec<(String, vrpsa::CvrpInstance)>,
    gen: GenParams,
    backend: Backend,
    time_limit: Duration,
}

impl Harness {
    fn instance(&self, bench: &vrpsa::CvrpInstance, params: &GenParams) -> vrpsa::Result<VrpSaInstance> {
        build_instance(bench, params)
    }

    fn run(&self, inst: &VrpSaInstance, seed: u64, priority: bool) -> Result<Run, String> {
        let cfg = PipelineConfig {
            priority,
            flexible: false,
            seed,
            backend: self.backend.clone(),
            time_limit: self.time_limit,
        };
        let sol = solve_vrpsa(inst, &cfg).map_err(|e| e.to_string())?;
        if let vrpsa::pipeline::Report::Fail(why) = validate(inst, &sol) {
            return Err(format!("invalid: {}", why.join("; ")));
        }
        let m = sol.metrics;
        Ok(Run { f1: m.f1, f2: m.f2, fp: m.fp })
    }

    /// Runs every benchmark and seed with the given generator tweak.
    fn sweep(&self, tweak: impl Fn(&mut GenParams), seeds: &[u64]) -> Vec<Result<Run, String>> {
        let mut out = Vec::new();
        for (_, bench) in &self.benchmarks {
            for &seed in seeds {
                let mut params = GenParams { seed, ..self.gen.clone() };
                tweak(&mut params);
                let r = self.instance(bench, &params).map_err(|e| e.to_string()).and_then(|inst| self.run(&inst, seed, true));
                out.push(r);
            }
        }
        out
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Exit> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r).context("writing csv row")?;
    }
    w.flush().context("flushing csv")?;
    Ok(())
}

pub fn cmd_bench(config: &Path, out: &Path) -> Result<(), Exit> {
    let text = fs::read_to_string(config).map_err(|e| fail(code::INPUT, format!("{}: {e}", config.display())))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| fail(code::INPUT, format!("{}: {e}", config.display())))?;
    cfg.check().map_err(|e| fail(code::INPUT, format!("{}: {e}", config.display())))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let mut benchmarks = Vec::new();
    for p in &cfg.instances {
        let path = base.join(p);
        let text = fs::read_to_string(&path).map_err(|e| fail(code::INPUT, format!("{}: {e}", path.display())))?;
        let bench = parse_cvrp(&text).map_err(|e| fail(code::INPUT, format!("{}: {e}", path.display())))?;
        benchmarks.push((bench.name.clone(), bench));
    }
    let backend = match &cfg.solver_cmd {
        Some(command) => Backend::External { command: command.clone() },
        None => Backend::default(),
    };
    let h = Harness {
        benchmarks,
        gen: cfg.gen.params(),
        backend,
        time_limit: Duration::from_secs_f64(cfg.time_limit),
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut ratios = Vec::new();
    for (name, bench) in &h.benchmarks {
        for &seed in &cfg.seeds {
            let params = GenParams { seed, ..h.gen.clone() };
            let both = h.instance(bench, &params).map_err(|e| e.to_string()).and_then(|inst| {
                let p = h.run(&inst, seed, true)?;
                let r = h.run(&inst, seed, false)?;
                Ok((p, r))
            });
            let row = match both {
                Ok((p, r)) => {
                    if p.f2 < p.f1 {
                        log::warn!("{name}/{seed}: HDV-only cost {} below the AV relaxation {}", p.f2, p.f1);
                    }
                    RatioRow {
                        instance: name.clone(),
                        seed,
                        status: "ok".into(),
                        f1: Some(p.f1),
                        f2: Some(p.f2),
                        fp: Some(p.fp),
                        fp_random: Some(r.fp),
                        f2_f1: Some(p.f2 / p.f1),
                        fp_f1: Some(p.fp / p.f1),
                        fp_random_f1: Some(r.fp / p.f1),
                    }
                }
                Err(e) => RatioRow {
                    instance: name.clone(),
                    seed,
                    status: e,
                    f1: None,
                    f2: None,
                    fp: None,
                    fp_random: None,
                    f2_f1: None,
                    fp_f1: None,
                    fp_random_f1: None,
                },
            };
            eprintln!("{name}/{seed}: {}", row.status);
            ratios.push(row);
        }
    }
    write_csv(&out.join("ratios.csv"), &ratios)?;

    let mut bt = Vec::new();
    for &b in &cfg.b_factors {
        for &t in &cfg.t_factors {
            let runs = h.sweep(
                |p| {
                    p.b_factor = b;
                    p.t_factor = t;
                },
                &cfg.seeds,
            );
            let ok: Vec<&Run> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            bt.push(BtRow {
                b_factor: b,
                t_factor: t,
                runs: runs.len(),
                failures: runs.len() - ok.len(),
                mean_fp_f1: mean(ok.iter().map(|r| r.fp / r.f1)),
            });
        }
    }
    write_csv(&out.join("sweep_bt.csv"), &bt)?;

    let mut gs = Vec::new();
    for &g in &cfg.grid_sizes {
        let runs = h.sweep(
            |p| {
                p.gx = g;
                p.gy = g;
            },
            &cfg.seeds,
        );
        let ok: Vec<&Run> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
        gs.push(GRow {
            g,
            runs: runs.len(),
            failures: runs.len() - ok.len(),
            mean_f1_f2: mean(ok.iter().map(|r| r.f1 / r.f2)),
            mean_fp_f2: mean(ok.iter().map(|r| r.fp / r.f2)),
        });
    }
    write_csv(&out.join("sweep_g.csv"), &gs)?;
    println!("wrote {} ratio rows, {} budget/horizon cells, {} grid sizes to {}", ratios.len(), bt.len(), gs.len(), out.display());
    Ok(())
}
