//! The eight named experiment pipelines.

use serde_json::{json, Value};

use qcompound_core::channels::KrausChannel;
use qcompound_core::coding::{
    monte_carlo_fidelity, one_shot_bound, truncate_channel, MonteCarloConfig,
};
use qcompound_core::compound::{
    bsst_check, build_adapted_net, compound_capacity_lower, convert_code, discriminate, fit_decay,
    informed_code, min_coherent_information, optimize_probe,
};
use qcompound_core::error::Result;
use qcompound_core::information::{
    coherent_information, entanglement_fidelity, entropy_exchange, entropy_psd,
};
use qcompound_core::qmat::DensityOperator;
use qcompound_core::tol::Guards;
use qcompound_core::typicality::{typical_kraus, typical_projector};
use qcompound_core::{tol, Error};

use crate::config::ExperimentConfig;
use crate::report::{number, Row};

pub struct PipelineOutput {
    pub rows: Vec<Row>,
    pub extra: Option<Value>,
    /// Per-trial stream for the one-shot pipeline.
    pub trials_csv: Option<String>,
}

fn row(cells: Vec<(&str, Value)>) -> Row {
    cells.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("{what} required")))
}

pub fn run_info(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let family = cfg.family.load_members()?;
    let mut rows = Vec::new();
    for (i, ch) in family.members().iter().enumerate() {
        let pi = DensityOperator::maximally_mixed(ch.in_dim());
        let ic = coherent_information(&pi, ch, guards)?;
        let fe = if ch.in_dim() == ch.out_dim() {
            entanglement_fidelity(&pi, ch, guards)?
        } else {
            f64::NAN
        };
        let se = entropy_exchange(&pi, ch)?;
        let s_out = entropy_psd(&ch.apply_density(&pi)?)?;
        rows.push(row(vec![
            ("member", json!(i)),
            ("in_dim", json!(ch.in_dim())),
            ("out_dim", json!(ch.out_dim())),
            ("coherent_information", number(ic)),
            ("entanglement_fidelity", number(fe)),
            ("entropy_exchange", number(se)),
            ("output_entropy", number(s_out)),
        ]));
    }
    Ok(PipelineOutput {
        rows,
        extra: None,
        trials_csv: None,
    })
}

pub fn run_typicality(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let spectrum = cfg
        .rho_spectrum
        .clone()
        .ok_or_else(|| Error::InvalidParameter("rho_spectrum required".into()))?;
    let l = need(cfg.l, "l")?;
    let delta = need(cfg.delta, "delta")?;
    let rho = DensityOperator::from_probabilities(&spectrum)?;
    let (spec, cert) = typical_projector(&rho, l, delta, tol::typicality_c(), guards)?;
    let mut rows = vec![row(vec![
        ("kind", json!("projector")),
        ("l", json!(l)),
        ("delta", number(delta)),
        ("mass", number(cert.mass)),
        ("log2_dim", number(cert.log2_dim)),
        ("entropy", number(cert.entropy)),
        ("phi", number(cert.phi)),
        ("eta", number(cert.eta)),
        ("c_max", number(cert.c_max)),
        ("items_hold", json!(cert.all_hold())),
        ("typical_dim", json!(spec.dim().to_string())),
    ])];
    // With a single-member family present, also certify the Kraus reduction.
    if let Ok(family) = cfg.family.load_members() {
        for (i, ch) in family.members().iter().enumerate() {
            let pi = DensityOperator::maximally_mixed(ch.in_dim());
            let tk = typical_kraus(ch, &pi, l, delta, tol::typicality_c(), guards)?;
            rows.push(row(vec![
                ("kind", json!(format!("kraus_{i}"))),
                ("l", json!(l)),
                ("delta", number(delta)),
                ("mass", number(tk.certificate.mass)),
                ("log2_dim", number(tk.certificate.log2_n_words)),
                ("entropy", number(tk.certificate.entropy_exchange)),
                ("phi", number(tk.certificate.gamma)),
                ("eta", number(tk.certificate.mass_bound)),
                ("c_max", number(tk.certificate.gamma_min)),
                ("items_hold", json!(tk.certificate.count_bound_holds)),
                ("typical_dim", json!(tk.certificate.n_words.to_string())),
            ]));
        }
    }
    let extra = serde_json::to_value(&cert).ok();
    Ok(PipelineOutput {
        rows,
        extra,
        trials_csv: None,
    })
}

pub fn run_one_shot(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let family = cfg.family.load_members()?;
    let l = need(cfg.l, "l")?;
    let k = need(cfg.k, "k")?;
    let trials = need(cfg.trials, "trials")?;
    let seed = need(cfg.seed, "seed")?;
    let pi = DensityOperator::maximally_mixed(family.in_dim());
    // With δ present each member is truncated; otherwise the plain tensor
    // powers are used (the noiseless-control shape).
    let mut blocks: Vec<KrausChannel> = Vec::new();
    let mut envelopes: Vec<f64> = Vec::new();
    for ch in family.members() {
        match cfg.delta {
            Some(delta) => {
                let tr = truncate_channel(ch, &pi, l, delta, guards)?;
                envelopes.push(tr.hs_sq_envelope_log2);
                blocks.push(tr.channel);
            }
            None => blocks.push(ch.tensor_power(l, guards)?),
        }
    }
    let block_refs: Vec<&KrausChannel> = blocks.iter().collect();
    let dim_gl = family.in_dim().pow(l as u32);
    let pi_gl = DensityOperator::maximally_mixed(dim_gl);
    let env_opt = if envelopes.len() == blocks.len() && !envelopes.is_empty() {
        Some(envelopes.as_slice())
    } else {
        None
    };
    let bound = one_shot_bound(&block_refs, env_opt, k, &pi_gl)?;
    let mc_cfg = MonteCarloConfig {
        k,
        trials,
        seed,
        opt_iters: cfg.opt_iters.unwrap_or(4),
        opt_tol: 1e-10,
    };
    let mc = monte_carlo_fidelity(&block_refs, dim_gl, &mc_cfg)?;
    // Module invariant: every trial dominates its decoupling floor.
    for t in &mc.trials {
        if t.fidelity < t.w - t.gap - 1e-9 {
            return Err(Error::InvalidState(format!(
                "trial {} violates the decoupling floor",
                t.trial
            )));
        }
    }
    let rows = vec![row(vec![
        ("l", json!(l)),
        ("k", json!(k)),
        ("trials", json!(trials)),
        ("bound", number(bound.bound)),
        ("sharp_bound", number(bound.sharp_bound)),
        ("average_trace", number(bound.average_trace)),
        ("vacuous", json!(bound.vacuous)),
        ("mean_fidelity", number(mc.mean)),
        ("std_fidelity", number(mc.std)),
        ("stderr", number(mc.stderr)),
        ("min_fidelity", number(mc.min)),
    ])];
    // Per-trial stream: runtime_ms is provenance, not part of the
    // deterministic numeric contract.
    let mut trials_csv = String::from("trial,seed,fidelity,w,gap,runtime_ms\n");
    for t in &mc.trials {
        trials_csv.push_str(&format!(
            "{},{},{:.11e},{:.11e},{:.11e},{:.3}\n",
            t.trial, t.seed, t.fidelity, t.w, t.gap, t.runtime_ms
        ));
    }
    let extra = serde_json::to_value(&bound).ok();
    Ok(PipelineOutput {
        rows,
        extra,
        trials_csv: Some(trials_csv),
    })
}

pub fn run_net(cfg: &ExperimentConfig, _guards: &Guards) -> Result<PipelineOutput> {
    let grid = cfg.family.grid_family()?;
    let tau = need(cfg.tau, "tau")?;
    let net = build_adapted_net(&grid, tau)?;
    let d = net.members.in_dim() as f64;
    let dp = net.members.out_dim() as f64;
    let log2_cap = 2.0 * (d * dp) * (d * dp) * (6.0 / tau).log2();
    let mut rows = Vec::new();
    for (i, p) in net.params.iter().enumerate() {
        rows.push(row(vec![
            ("member", json!(i)),
            ("param", number(*p)),
            ("kraus_count", json!(net.members.members()[i].kraus_count())),
        ]));
    }
    let extra = Some(json!({
        "tau": tau,
        "members": net.members.len(),
        "base_cover_radius": net.base_cover_radius,
        "certified_radius": net.certified_radius,
        "log2_cardinality": (net.members.len() as f64).log2(),
        "log2_cardinality_bound": log2_cap,
        "mixing_applied": net.mixing_applied,
    }));
    Ok(PipelineOutput {
        rows,
        extra,
        trials_csv: None,
    })
}

pub fn run_discriminate(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let family = cfg.family.load_members()?;
    let m_max = need(cfg.m, "m")?;
    let seed = need(cfg.seed, "seed")?;
    let probe = optimize_probe(&family, 150, seed)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for m in 1..=m_max {
        let rep = discriminate(&family, m, &probe, guards)?;
        rows.push(row(vec![
            ("m", json!(m)),
            ("min_success", number(rep.min_success)),
            ("avg_success", number(rep.avg_success)),
            ("indistinguishable", json!(rep.indistinguishable)),
        ]));
        reports.push(rep);
    }
    let f = fit_decay(&reports);
    let probe_json: Vec<Value> = probe.iter().map(|z| json!([z.re, z.im])).collect();
    let extra = Some(json!({ "fitted_f": f, "probe": probe_json }));
    Ok(PipelineOutput {
        rows,
        extra,
        trials_csv: None,
    })
}

pub fn run_convert(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let family = cfg.family.load_members()?;
    let m = need(cfg.m, "m")?;
    let t = need(cfg.t, "t")?;
    let k = need(cfg.k, "k")?;
    let seed = need(cfg.seed, "seed")?;
    let probe = optimize_probe(&family, 150, seed)?;
    let disc = discriminate(&family, m, &probe, guards)?;
    let codes: Vec<_> = family
        .members()
        .iter()
        .map(|ch| informed_code(ch, t, k, cfg.opt_iters.unwrap_or(25), guards))
        .collect::<Result<_>>()?;
    let rep = convert_code(&codes, &family, Some(&disc), t, guards)?;
    if !rep.product_bound_holds() {
        return Err(Error::InvalidState(
            "combined fidelity fell below the product bound".into(),
        ));
    }
    let rows = rep
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            row(vec![
                ("member", json!(i)),
                ("success", number(r.success)),
                ("informed_fidelity", number(r.informed_fidelity)),
                ("combined_fidelity", number(r.combined_fidelity)),
                ("product_bound", number(r.product_bound)),
            ])
        })
        .collect();
    Ok(PipelineOutput {
        rows,
        extra: Some(json!({"m": m, "t": t, "k": k})),
        trials_csv: None,
    })
}

pub fn run_capacity(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let family = cfg.family.load_members()?;
    let l = cfg.l.unwrap_or(1);
    let seed = need(cfg.seed, "seed")?;
    let est = compound_capacity_lower(
        &family,
        l,
        cfg.opt_iters.unwrap_or(60),
        cfg.starts.unwrap_or(3),
        seed,
        guards,
    )?;
    let pi = DensityOperator::maximally_mixed(family.in_dim().pow(l as u32));
    let at_pi = {
        let mut best = f64::INFINITY;
        for ch in family.members() {
            let ic = if l == 1 {
                coherent_information(&pi, ch, guards)?
            } else {
                qcompound_core::compound::coherent_information_tensor_power(&pi, ch, l)?
            };
            best = best.min(ic);
        }
        best / l as f64
    };
    let rho_entries: Vec<Value> = est
        .rho
        .matrix()
        .entries_row_major()
        .iter()
        .map(|z| json!([z.re, z.im]))
        .collect();
    let rows = vec![row(vec![
        ("l", json!(l)),
        ("value", number(est.value)),
        ("value_at_maximally_mixed", number(at_pi)),
        ("starts", json!(est.starts)),
        ("iterations", json!(est.iterations_used)),
    ])];
    let min_ic = min_coherent_information(
        &DensityOperator::maximally_mixed(family.in_dim()),
        &family,
        guards,
    )?;
    Ok(PipelineOutput {
        rows,
        extra: Some(json!({"maximizer": rho_entries, "single_copy_min_ic_at_pi": min_ic})),
        trials_csv: None,
    })
}

pub fn run_bsst(cfg: &ExperimentConfig, guards: &Guards) -> Result<PipelineOutput> {
    let spectrum = cfg
        .rho_spectrum
        .clone()
        .ok_or_else(|| Error::InvalidParameter("rho_spectrum required".into()))?;
    let family = cfg.family.load_members()?;
    let ls = cfg
        .l_grid
        .clone()
        .ok_or_else(|| Error::InvalidParameter("l_grid required".into()))?;
    let deltas = cfg
        .delta_schedule
        .clone()
        .unwrap_or_else(|| vec![cfg.delta.unwrap_or(0.45); ls.len()]);
    let taus = cfg
        .tau_schedule
        .clone()
        .unwrap_or_else(|| vec![cfg.tau.unwrap_or(0.05); ls.len()]);
    let rho = DensityOperator::from_probabilities(&spectrum)?;
    let rows_raw = bsst_check(&rho, &family, &ls, &deltas, &taus, guards)?;
    for r in &rows_raw {
        if r.deviation > r.envelope {
            return Err(Error::InvalidState(format!(
                "deviation {} exceeds the envelope at l={}",
                r.deviation, r.l
            )));
        }
    }
    let rows = rows_raw
        .iter()
        .map(|r| {
            row(vec![
                ("l", json!(r.l)),
                ("delta", number(r.delta)),
                ("tau", number(r.tau)),
                ("ic_per_use", number(r.ic_per_use)),
                ("target", number(r.target)),
                ("deviation", number(r.deviation)),
                ("envelope", number(r.envelope)),
                ("typical_dim", json!(r.typical_dim.to_string())),
            ])
        })
        .collect();
    Ok(PipelineOutput {
        rows,
        extra: None,
        trials_csv: None,
    })
}
