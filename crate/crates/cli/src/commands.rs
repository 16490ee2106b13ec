use std::fmt::Write as _;

use effcache_core::games::{self, verify_psne};
use effcache_core::lp::solve;
use effcache_core::model::{DemandModel, DemandOutcome, Instance, InstanceFile};
use effcache_core::multiuser::{
    check_decoding, deliver as deliver_outcome, expected_throughput_multiuser, popular_placement,
    ExpectationMode,
};
use effcache_core::oracle::{
    bit_level_two_user_cost, grid_best_sum, lp_vertex_enumerate, GridSpec, MAX_ENUM_ROWS,
    MAX_ENUM_VARS,
};
use effcache_core::presets::{self, TwoUserPreset};
use effcache_core::twouser::{
    boundary_sweep, build_scalarized_lp, outcome_cost, uniform_alpha_grid, TwoUserPlacement,
};
use effcache_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{emit, load_instance, meta, pretty, result_value, write_text, CliError};
use crate::{DeliverArgs, DomainArgs, GameArgs, GenArgs, Mode, OracleArgs, Preset};

fn instance_file(inst: &Instance) -> InstanceFile {
    InstanceFile {
        num_items: inst.num_items(),
        chunks_per_item: inst.catalog.chunks_per_item,
        buffers: inst.buffers.capacities().to_vec(),
        preferences: inst.preferences.rows().to_vec(),
        demand_model: DemandModel::IndependentSingle,
    }
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let inst = match args.preset {
        Preset::Fig1 => match args.buffer {
            None => presets::motivating_example(),
            Some(b) => Instance::single_request(
                presets::motivating_example().preferences.rows().to_vec(),
                vec![b; 2],
                2,
            )?,
        },
        Preset::P1 => TwoUserPreset::BothZipf.instance(args.buffer.unwrap_or(1.0))?,
        Preset::P2 => TwoUserPreset::UniformZipf.instance(args.buffer.unwrap_or(1.0))?,
        Preset::P3 => TwoUserPreset::BothUniform.instance(args.buffer.unwrap_or(1.0))?,
        Preset::P4 => presets::three_user_instance(args.buffer.unwrap_or(2.0), args.chunks)?,
        Preset::Beta => presets::beta_instance(args.beta, args.buffer.unwrap_or(2.0))?,
        Preset::Random => {
            let inst = presets::random_two_user(&mut rng, args.items)?;
            match args.buffer {
                None => inst,
                Some(b) => {
                    Instance::single_request(inst.preferences.rows().to_vec(), vec![b; 2], 1)?
                }
            }
        }
        Preset::RandomMulti => {
            presets::random_multiuser(&mut rng, args.users, args.items, args.chunks.max(1))?
        }
    };
    let mut text = instance_file(&inst).to_json();
    text.push('\n');
    write_text(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct Vertex {
    alpha: f64,
    r1: f64,
    r2: f64,
    placement: TwoUserPlacement,
}

pub fn domain(args: &DomainArgs) -> Result<(), CliError> {
    if args.alphas == 0 {
        return Err(CliError::Input("--alphas must be positive".into()));
    }
    let loaded = load_instance(&args.instance)?;
    let inst = &loaded.instance;
    inst.require_two_users()?;
    let sweep = boundary_sweep(inst, &uniform_alpha_grid(args.alphas))?;

    let mut csv = String::from("alpha,r1,r2\n");
    for s in &sweep.samples {
        writeln!(csv, "{},{},{}", s.alpha, s.point.r1, s.point.r2).expect("writing to a String");
    }
    let vertices: Vec<Vertex> = sweep
        .boundary
        .vertices
        .iter()
        .map(|v| Vertex {
            alpha: v.alpha,
            r1: v.point.r1,
            r2: v.point.r2,
            placement: v.placement.clone(),
        })
        .collect();
    let pure = inst.pure_caching();
    let result = result_value(&json!({
        "vertices": vertices,
        "pure_caching": pure,
        "samples": sweep.samples.len(),
    }))?;
    let report = pretty(&json!({
        "meta": meta("domain", &loaded, None, json!({ "alphas": args.alphas })),
        "result": result,
    }));
    match &args.out {
        Some(path) => {
            write_text(Some(path), &csv)?;
            write_text(Some(&path.with_extension("json")), &report)
        }
        None => write_text(None, &format!("{csv}\n{report}")),
    }
}

fn check_search(iters: usize, eps: f64) -> Result<(), CliError> {
    if iters == 0 || eps.is_nan() || eps <= 0.0 {
        return Err(CliError::Input(
            "--iters must be positive and --eps greater than zero".into(),
        ));
    }
    Ok(())
}

fn game_params(args: &GameArgs) -> Value {
    json!({ "iters": args.iters, "eps": args.eps })
}

pub fn nash(args: &GameArgs) -> Result<(), CliError> {
    check_search(args.iters, args.eps)?;
    let loaded = load_instance(&args.instance)?;
    let inst = &loaded.instance;
    inst.require_two_users()?;
    let ne = games::find_psne(inst, args.iters, args.eps, args.seed)?;
    let verified = ne.converged && verify_psne(inst, &ne.placement, 1e-6);
    let result = result_value(&json!({
        "converged": ne.converged,
        "iterations": ne.iterations,
        "payoffs": ne.payoffs,
        "placement": ne.placement,
        "verified": verified,
    }))?;
    emit(
        args.out.as_deref(),
        meta("nash", &loaded, Some(args.seed), game_params(args)),
        result,
    )
}

pub fn allocate(args: &GameArgs) -> Result<(), CliError> {
    check_search(args.iters, args.eps)?;
    let loaded = load_instance(&args.instance)?;
    let inst = &loaded.instance;
    inst.require_two_users()?;
    let out = games::allocate(inst, args.iters, args.eps, args.seed)?;
    let result = result_value(&json!({
        "converged": out.nash.converged,
        "iterations": out.nash.iterations,
        "payoffs": out.nash.payoffs,
        "pure_caching": out.pure_caching,
        "allocation": out.allocation,
    }))?;
    emit(
        args.out.as_deref(),
        meta("allocate", &loaded, Some(args.seed), game_params(args)),
        result,
    )
}

pub fn deliver(args: &DeliverArgs) -> Result<(), CliError> {
    let loaded = load_instance(&args.instance)?;
    let inst = &loaded.instance;
    let mode = match args.mode {
        Mode::Exact => ExpectationMode::Exact,
        Mode::Mc => ExpectationMode::MonteCarlo {
            samples: args.samples,
            seed: args.seed,
        },
    };
    let throughput = expected_throughput_multiuser(inst, mode)?;

    let schedule = match &args.demand {
        None => None,
        Some(items) => {
            if items.len() != inst.num_users()
                || items.iter().any(|&i| i == 0 || i > inst.num_items())
            {
                return Err(CliError::Input(format!(
                    "--demand needs {} one-based item ids in 1..={}",
                    inst.num_users(),
                    inst.num_items()
                )));
            }
            let zero_based: Vec<usize> = items.iter().map(|i| i - 1).collect();
            let outcome = DemandOutcome::singles(&zero_based);
            let profile = popular_placement(inst)?;
            let schedule = deliver_outcome(&profile, &outcome)?;
            check_decoding(&profile, &schedule, &outcome)?;
            Some(schedule)
        }
    };

    let mut result = json!({
        "mode": match args.mode { Mode::Exact => "exact", Mode::Mc => "mc" },
        "throughput": throughput,
        "pure_caching": inst.pure_caching(),
    });
    if let Some(s) = &schedule {
        result["schedule"] =
            serde_json::to_value(s).map_err(|e| CliError::Solver(e.to_string()))?;
    }
    let result = result_value(&result)?;
    let mut params = json!({ "mode": result["mode"].clone() });
    if args.mode == Mode::Mc {
        params["samples"] = json!(args.samples);
    }
    if let Some(d) = &args.demand {
        params["demand"] = json!(d);
    }
    let seed = (args.mode == Mode::Mc).then_some(args.seed);
    emit(
        args.out.as_deref(),
        meta("deliver", &loaded, seed, params),
        result,
    )
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    status: &'static str,
    detail: String,
}

impl Check {
    fn from(name: &'static str, outcome: Result<Result<String, String>, Error>) -> Self {
        match outcome {
            Ok(Ok(detail)) => Check {
                name,
                status: "pass",
                detail,
            },
            Ok(Err(detail)) => Check {
                name,
                status: "fail",
                detail,
            },
            Err(
                e @ (Error::TooLarge(_)
                | Error::NonIntegralChunkBudget { .. }
                | Error::SupportTooLarge { .. }),
            ) => Check {
                name,
                status: "skipped",
                detail: e.to_string(),
            },
            Err(e) => Check {
                name,
                status: "fail",
                detail: e.to_string(),
            },
        }
    }
}

fn grid_placement(rng: &mut impl Rng, inst: &Instance, g: usize) -> TwoUserPlacement {
    let n = inst.num_items();
    let caps = [0, 1].map(|k| (inst.capacity(k) * g as f64 + 1e-9).floor() as usize);
    let (mut u, mut v, mut w) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut left_u, mut left_v) = (caps[0], caps[1]);
    for i in 0..n {
        let a = rng.gen_range(0..=g.min(left_u));
        let b = rng.gen_range(0..=g.min(left_v));
        let c = rng.gen_range((a + b).saturating_sub(g)..=a.min(b));
        left_u -= a;
        left_v -= b;
        u[i] = a as f64 / g as f64;
        v[i] = b as f64 / g as f64;
        w[i] = c as f64 / g as f64;
    }
    TwoUserPlacement { u, v, w }
}

fn random_small_lp(rng: &mut impl Rng) -> effcache_core::lp::LinearProgram {
    let (n, m) = (rng.gen_range(1..=5), rng.gen_range(1..=7));
    let objective = (0..n).map(|_| rng.gen_range(-4.0..6.0)).collect();
    let rows = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-3.0..7.0)).collect())
        .collect();
    let rhs = (0..m).map(|_| rng.gen_range(-2.0..10.0)).collect();
    effcache_core::lp::LinearProgram::new(objective, rows, rhs).expect("finite random program")
}

fn lp_agreement(lp: &effcache_core::lp::LinearProgram) -> Result<Option<String>, Error> {
    let a = solve(lp)?;
    let b = lp_vertex_enumerate(lp)?;
    if a.status != b.status {
        return Ok(Some(format!("status {:?} vs {:?}", a.status, b.status)));
    }
    if a.is_optimal() && (a.value - b.value).abs() > 1e-8 {
        return Ok(Some(format!("value {} vs {}", a.value, b.value)));
    }
    Ok(None)
}

pub fn oracle(args: &OracleArgs) -> Result<(), CliError> {
    let grid =
        GridSpec::new(args.grid).map_err(|_| CliError::Input("--grid must be positive".into()))?;
    let loaded = load_instance(&args.instance)?;
    let inst = &loaded.instance;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks = Vec::new();

    checks.push(Check::from(
        "lp_enumeration",
        (|| {
            let mut failures = Vec::new();
            for i in 0..50 {
                if let Some(msg) = lp_agreement(&random_small_lp(&mut rng))? {
                    failures.push(format!("random program {i}: {msg}"));
                }
            }
            let mut note = "50 random programs".to_string();
            if inst.num_users() == 2 {
                let s = build_scalarized_lp(inst, 0.5)?;
                if s.program.n_vars() <= MAX_ENUM_VARS && s.program.n_rows() <= MAX_ENUM_ROWS {
                    if let Some(msg) = lp_agreement(&s.program)? {
                        failures.push(format!("instance program: {msg}"));
                    }
                    note.push_str(" and the instance program");
                }
            }
            Ok(if failures.is_empty() {
                Ok(format!("{note} agree"))
            } else {
                Err(failures.join("; "))
            })
        })(),
    ));

    if inst.num_users() == 2 {
        checks.push(Check::from(
            "grid_inner_bound",
            (|| {
                let best = grid_best_sum(inst, grid)?;
                let rc = games::cooperative_total(inst)?;
                Ok(if best <= rc + 1e-6 {
                    Ok(format!("grid best {best} <= cooperative {rc}"))
                } else {
                    Err(format!("grid best {best} exceeds cooperative {rc}"))
                })
            })(),
        ));

        checks.push(Check::from(
            "bit_level_costs",
            (|| {
                let g = args.grid;
                let mut worst: f64 = 0.0;
                let mut compared = 0;
                for _ in 0..20 {
                    let pl = grid_placement(&mut rng, inst, g);
                    for (outcome, _) in inst.demands.support().iter().take(1000) {
                        let bits = bit_level_two_user_cost(&pl, outcome, g)?;
                        let algebra = outcome_cost(&pl, outcome)?;
                        worst = worst
                            .max((bits.0 - algebra.0).abs())
                            .max((bits.1 - algebra.1).abs());
                        compared += 1;
                    }
                }
                Ok(if worst <= 1e-12 {
                    Ok(format!("{compared} comparisons, max gap {worst:e}"))
                } else {
                    Err(format!("max gap {worst:e} over {compared} comparisons"))
                })
            })(),
        ));
    }

    checks.push(Check::from(
        "decodability",
        (|| {
            let profile = popular_placement(inst)?;
            let support = inst.demands.support();
            if support.len() > 100_000 {
                return Err(Error::TooLarge(format!("{} outcomes", support.len())));
            }
            for (outcome, _) in support {
                let schedule = deliver_outcome(&profile, outcome)?;
                if let Err(e) = check_decoding(&profile, &schedule, outcome) {
                    return Ok(Err(e.to_string()));
                }
            }
            Ok(Ok(format!("{} outcomes decode", support.len())))
        })(),
    ));

    checks.push(Check::from(
        "beats_pure_caching",
        (|| {
            let r = expected_throughput_multiuser(inst, ExpectationMode::Exact)?;
            let pure = inst.pure_caching();
            let bad: Vec<usize> = (0..inst.num_users())
                .filter(|&k| r.throughput[k] < pure[k] - 1e-9)
                .map(|k| k + 1)
                .collect();
            Ok(if bad.is_empty() {
                Ok("every user at least at its pure-caching throughput".to_string())
            } else {
                Err(format!("users {bad:?} below pure caching"))
            })
        })(),
    ));

    let failed = checks.iter().filter(|c| c.status == "fail").count();
    let result = result_value(&json!({ "checks": checks, "all_passed": failed == 0 }))?;
    emit(
        args.out.as_deref(),
        meta(
            "oracle",
            &loaded,
            Some(args.seed),
            json!({ "grid": args.grid }),
        ),
        result,
    )?;
    if failed > 0 {
        return Err(CliError::Solver(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
