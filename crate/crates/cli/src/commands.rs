use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use tsvqr::io::{
    load_model, read_dataset_csv, read_inputs_csv, save_model, write_dataset_csv,
    write_predictions_csv,
};
use tsvqr::selection::write_grid_csv;
use tsvqr::{
    coverage_stats, evaluate, fit_with, gacv, generate, generate_sinc, grid_search,
    sinc_quantile_oracle, CoverageStats, Dataset, EvalReport, Family, FitOptions, GeneratorSpec,
    GridSpec, Hyperparams, TrainedModel,
};

use crate::manifest::RunManifest;
use crate::{
    Cli, Command, DataOpts, EvalArgs, GenArgs, GlobalOpts, GridArgs, PlotArgs, PredictArgs,
    TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => gen(g, a),
        Command::Train(a) => train(g, a),
        Command::Predict(a) => predict(g, a),
        Command::Gridsearch(a) => gridsearch(g, a),
        Command::Eval(a) => eval(g, a),
        Command::Plotdata(a) => plotdata(g, a),
    }
}

#[derive(Serialize)]
struct Config<'a, T: Serialize> {
    global: &'a GlobalOpts,
    args: &'a T,
}

fn manifest<T: Serialize>(command: &'static str, g: &GlobalOpts, args: &T) -> Result<RunManifest> {
    RunManifest::new(command, g.seed, &Config { global: g, args })
}

fn read_dataset(m: &mut RunManifest, opts: &DataOpts) -> Result<Dataset> {
    let bytes = m.read_input(&opts.data)?;
    read_dataset_csv(bytes.as_slice(), opts.target_col.as_deref())
        .with_context(|| format!("parsing {}", opts.data.display()))
}

fn read_model(m: &mut RunManifest, path: &Path) -> Result<TrainedModel> {
    let bytes = m.read_input(path)?;
    load_model(bytes.as_slice()).with_context(|| format!("loading {}", path.display()))
}

fn model_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    save_model(model, &mut out)?;
    out.push(b'\n');
    Ok(out)
}

fn gen(g: &GlobalOpts, a: &GenArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("gen", g, a)?;
    let (def_train, def_test) = a.family.default_sizes();
    let n_train = a.n_train.unwrap_or(def_train);
    let n_test = a.n_test.unwrap_or(def_test);
    let (train, test) = if a.family == Family::Sinc {
        if a.noiseless {
            bail!("--noiseless is not available for the sinc family");
        }
        // disjoint seeds keep the two samples independent
        (
            generate_sinc(n_train, g.seed)?,
            generate_sinc(n_test, g.seed.wrapping_add(1))?,
        )
    } else {
        generate(&GeneratorSpec {
            family: a.family,
            n_train,
            n_test,
            seed: g.seed,
            noiseless: a.noiseless,
        })?
    };
    let name = a.name.clone().unwrap_or_else(|| a.family.to_string());
    for (suffix, data) in [("train", &train), ("test", &test)] {
        let mut buf = Vec::new();
        write_dataset_csv(data, &mut buf)?;
        m.write_output(&a.out_dir.join(format!("{name}_{suffix}.csv")), &buf)?;
    }
    m.time("total", start.elapsed().as_secs_f64());
    m.save_beside(&a.out_dir.join(&name))?;
    println!("wrote {name}_train.csv ({n_train} rows) and {name}_test.csv ({n_test} rows)");
    Ok(())
}

fn diagnostics_text(model: &TrainedModel) -> String {
    let d = model.diagnostics();
    let mut s = String::new();
    for (label, r) in [("lower", &d.lower), ("upper", &d.upper)] {
        let _ = writeln!(
            s,
            "{label} dual: epochs {} pg-norm {:.3e} objective {:.6e} converged {}",
            r.epochs_run, r.final_pg_norm, r.objective, r.converged
        );
    }
    s
}

fn train(g: &GlobalOpts, a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("train", g, a)?;
    let data = read_dataset(&mut m, &a.data)?;
    let h = Hyperparams {
        c1: a.c1.unwrap_or(a.c),
        c2: a.c2.unwrap_or(a.c),
        eps1: a.eps1.unwrap_or(a.eps),
        eps2: a.eps2.unwrap_or(a.eps),
        tau: a.tau,
        kernel: a.kernel.spec(a.p),
        solver: g.solver(),
    };
    let opts = FitOptions {
        standardize: !a.no_standardize,
        ..FitOptions::default()
    };
    let model = fit_with(&data, &h, &opts)?;
    m.time("fit", model.fit_seconds());
    let report = evaluate(&model, &data, h.tau)?;
    m.write_output(&a.out, &model_bytes(&model)?)?;
    m.time("total", start.elapsed().as_secs_f64());
    m.save_beside(&a.out)?;
    print!("{}", diagnostics_text(&model));
    println!(
        "training: risk {:.6} rmse {:.6} mae {:.6} sv {} fit {:.3}s",
        report.risk,
        report.rmse,
        report.mae,
        report.sv_count,
        model.fit_seconds()
    );
    if !model.diagnostics().converged() {
        eprintln!("warning: solver stopped at --max-epochs before reaching --tol");
    }
    Ok(())
}

fn predict(g: &GlobalOpts, a: &PredictArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("predict", g, a)?;
    let model = read_model(&mut m, &a.model)?;
    let bytes = m.read_input(&a.data.data)?;
    let inputs = read_inputs_csv(
        bytes.as_slice(),
        model.n_features(),
        a.data.target_col.as_deref(),
    )
    .with_context(|| format!("parsing {}", a.data.data.display()))?;
    let t = Instant::now();
    let bounds = model.predict_bounds_batch(&inputs)?;
    m.time("predict", t.elapsed().as_secs_f64());
    let mut out = Vec::new();
    write_predictions_csv(&bounds, &mut out)?;
    m.write_output(&a.out, &out)?;
    m.time("total", start.elapsed().as_secs_f64());
    m.save_beside(&a.out)?;
    println!("wrote {} predictions", bounds.len());
    Ok(())
}

fn grid_from_args(a: &GridArgs) -> GridSpec {
    let d = GridSpec::default();
    let or = |v: &Vec<f64>, def: Vec<f64>| if v.is_empty() { def } else { v.clone() };
    GridSpec {
        c_values: or(&a.c_values, d.c_values),
        p_values: or(&a.p_values, d.p_values),
        eps_values: or(&a.eps_values, d.eps_values),
        tau_values: or(&a.tau, d.tau_values),
        tie_c: a.tie_c,
        tie_eps: a.tie_eps,
    }
}

fn gridsearch(g: &GlobalOpts, a: &GridArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("gridsearch", g, a)?;
    let data = read_dataset(&mut m, &a.data)?;
    let grid = grid_from_args(a);
    let opts = FitOptions {
        standardize: !a.no_standardize,
        ..FitOptions::default()
    };
    let family = a.kernel.spec(1.0);
    for &tau in &grid.tau_values {
        let t = Instant::now();
        let cells = grid_search(&data, &grid, tau, &family, g.solver(), &opts)?;
        let mut csv = Vec::new();
        write_grid_csv(&cells, &mut csv)?;
        m.write_output(&a.out_dir.join(format!("grid_tau{tau}.csv")), &csv)?;
        let Some(best) = cells.iter().find(|c| c.error.is_none()) else {
            bail!("every grid cell failed at tau {tau}");
        };
        let model = fit_with(&data, &best.hyper, &opts)?;
        m.write_output(
            &a.out_dir.join(format!("best_tau{tau}.json")),
            &model_bytes(&model)?,
        )?;
        m.time(format!("tau_{tau}"), t.elapsed().as_secs_f64());
        println!(
            "tau {tau}: {} cells, best C1={} C2={} eps1={} eps2={} p={} gacv={}",
            cells.len(),
            best.hyper.c1,
            best.hyper.c2,
            best.hyper.eps1,
            best.hyper.eps2,
            best.hyper
                .kernel
                .param()
                .map_or("-".to_string(), |p| p.to_string()),
            best.gacv
                .map_or("undefined".to_string(), |v| format!("{v:.6}")),
        );
    }
    m.time("total", start.elapsed().as_secs_f64());
    m.save_beside(&a.out_dir.join("gridsearch"))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CensusCounts {
    pub on_lower: usize,
    pub below_lower: usize,
    pub above_lower: usize,
    pub on_upper: usize,
    pub above_upper: usize,
    pub inside: usize,
    pub i_sv: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub tau: f64,
    pub n_test: usize,
    #[serde(flatten)]
    pub report: EvalReport,
    pub coverage: CoverageStats,
    pub census: CensusCounts,
}

fn eval(g: &GlobalOpts, a: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("eval", g, a)?;
    let model = read_model(&mut m, &a.model)?;
    let test = read_dataset(&mut m, &a.data)?;
    let tau = model.hyper().tau;
    let mut report = evaluate(&model, &test, tau)?;
    if let Some(path) = &a.train {
        let train = read_dataset(
            &mut m,
            &DataOpts {
                data: path.clone(),
                target_col: a.data.target_col.clone(),
            },
        )?;
        report.gacv = gacv(&model, &train, tau)?;
    }
    let c = model.classify_support_vectors();
    let out = EvalOutput {
        tau,
        n_test: test.len(),
        coverage: coverage_stats(&model, &test)?,
        census: CensusCounts {
            on_lower: c.on_lower.len(),
            below_lower: c.below_lower.len(),
            above_lower: c.above_lower.len(),
            on_upper: c.on_upper.len(),
            above_upper: c.above_upper.len(),
            inside: c.inside.len(),
            i_sv: c.i_sv.len(),
        },
        report,
    };
    let json = serde_json::to_string_pretty(&out)?;
    if let Some(path) = &a.out {
        m.write_output(path, format!("{json}\n").as_bytes())?;
        m.time("total", start.elapsed().as_secs_f64());
        m.save_beside(path)?;
    }
    if a.json {
        println!("{json}");
    } else {
        let r = &out.report;
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        println!("tau        {tau}");
        println!("risk       {:.6}", r.risk);
        println!("rmse       {:.6}", r.rmse);
        println!("mae        {:.6}", r.mae);
        println!("mape       {}", opt(r.mape));
        println!(
            "gacv       {}",
            if a.train.is_some() {
                opt(r.gacv)
            } else {
                "n/a (pass --train)".into()
            }
        );
        println!("below f    {:.4}", out.coverage.below_fraction());
        println!("|I_SV|     {}", out.census.i_sv);
        println!("fit        {:.4}s", r.fit_seconds);
        println!("predict    {:.4}s", r.predict_seconds);
    }
    Ok(())
}

fn training_range(model: &TrainedModel) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in model.train_inputs().rows() {
        let x = match model.standardizer() {
            Some(s) => s.inverse_point(row)?[0],
            None => row[0],
        };
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok((lo, hi))
}

fn plotdata(g: &GlobalOpts, a: &PlotArgs) -> Result<()> {
    let start = Instant::now();
    let mut m = manifest("plotdata", g, a)?;
    let models: Vec<(PathBuf, TrainedModel)> = a
        .models
        .iter()
        .map(|p| Ok((p.clone(), read_model(&mut m, p)?)))
        .collect::<Result<_>>()?;
    for (path, model) in &models {
        if model.n_features() != 1 {
            bail!(
                "{} has {} input features; plot data needs single-feature models",
                path.display(),
                model.n_features()
            );
        }
    }
    if a.points == 0 {
        bail!("--points must be at least 1");
    }
    let (lo, hi) = training_range(&models[0].1)?;
    let (x_min, x_max) = (a.x_min.unwrap_or(lo), a.x_max.unwrap_or(hi));
    if x_min > x_max {
        bail!("--x-min {x_min} exceeds --x-max {x_max}");
    }
    let xs: Vec<f64> = if a.points == 1 {
        vec![x_min]
    } else {
        let step = (x_max - x_min) / (a.points - 1) as f64;
        (0..a.points)
            .map(|i| {
                if i + 1 == a.points {
                    x_max
                } else {
                    x_min + step * i as f64
                }
            })
            .collect()
    };
    let grid = Array2::from_shape_vec((xs.len(), 1), xs.clone())?;

    let mut out = String::from(if a.sinc_oracle {
        "x,tau,f_lower,f_upper,f,oracle\n"
    } else {
        "x,tau,f_lower,f_upper,f\n"
    });
    for (_, model) in &models {
        let tau = model.hyper().tau;
        for (x, (f1, f2)) in xs.iter().zip(model.predict_bounds_batch(&grid)?) {
            let _ = write!(out, "{x},{tau},{f1},{f2},{}", 0.5 * (f1 + f2));
            if a.sinc_oracle {
                let _ = write!(out, ",{}", sinc_quantile_oracle(*x, tau)?);
            }
            out.push('\n');
        }
    }
    m.write_output(&a.out, out.as_bytes())?;
    m.time("total", start.elapsed().as_secs_f64());
    m.save_beside(&a.out)?;
    println!("wrote {} rows", xs.len() * models.len());
    Ok(())
}
