//! One function per task. Each writes its artifacts and returns nothing
//! else; provenance is added by the caller.

use kcmlab_core::chiral::{fragmented_mismatch, mismatch_closed_form, mismatch_formula, DENSE_BUDGET};
use kcmlab_core::dynamics::{
    degeneracy_analysis, disorder_scan, evolve_checked, lifting_scan, quench_northeast,
    DiagonalObservable, KrylovOptions,
};
use kcmlab_core::fragmentation::{domain_wall, largest_component};
use kcmlab_core::io::{fmt_f64, CsvTable};
use kcmlab_core::zeromode::{
    certify_bound, find_factorizable, pair_flip_padding, sector_counts, CountOptions,
    DEFAULT_Q_MAX,
};
use kcmlab_core::{
    build_hamiltonian, build_perturbation, color, connected_components, east_west_mpo_state,
    entanglement_entropy, enumerate_basis, find_bound_states, presets, sector_from_seed, spectrum,
    zero_mode_basis, ChiralOperator, CountMethod, Family, Geometry, KcmError, LiftScanConfig,
    ModelSpec, MpoSpec, ObservableSpec, PaddingSpec, PerturbationSpec, Result, SectorBasis,
    StateVector,
};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::Artifacts;

fn seed_bits(cfg: &RunConfig, geometry: Geometry) -> Result<Option<u64>> {
    cfg.get("seed_state").map(|s| geometry.parse_state(s)).transpose()
}

fn largest_of(spec: &ModelSpec, basis: &SectorBasis) -> Result<SectorBasis> {
    let h = build_hamiltonian(spec, basis)?;
    Ok(connected_components(&h).largest_sector)
}

/// `seed_state` wins; otherwise `particles` with `sector = largest | full |
/// domain-wall`. Pair-flip without either uses the full space.
pub fn sector(cfg: &RunConfig, spec: &ModelSpec) -> Result<SectorBasis> {
    if let Some(seed) = seed_bits(cfg, spec.geometry)? {
        if let Some(n) = cfg.get("particles") {
            if spec.family.conserves_particles() && n.parse() != Ok(seed.count_ones() as usize) {
                return Err(KcmError::Domain(format!(
                    "seed has {} particles, config says {n}",
                    seed.count_ones()
                )));
            }
        }
        return sector_from_seed(spec, seed);
    }
    let mode = cfg.get("sector").unwrap_or("largest");
    if !spec.family.conserves_particles() {
        let full = enumerate_basis(spec.geometry, None)?;
        return match mode {
            "full" => Ok(full),
            "largest" => largest_of(spec, &full),
            other => Err(KcmError::Parse(format!("unknown sector `{other}`"))),
        };
    }
    let n = cfg.usize_req("particles")?;
    match mode {
        "largest" => largest_component(spec, n),
        "full" => enumerate_basis(spec.geometry, Some(n)),
        "domain-wall" | "domain_wall" => sector_from_seed(spec, domain_wall(n)),
        other => Err(KcmError::Parse(format!("unknown sector `{other}`"))),
    }
}

fn sector_of(cfg: &RunConfig) -> Result<(ModelSpec, SectorBasis)> {
    let spec = cfg.model()?;
    let basis = sector(cfg, &spec)?;
    Ok((spec, basis))
}

pub fn enumerate(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (_, basis) = sector_of(cfg)?;
    let mut t = CsvTable::new(["index", "state", "particles"]);
    for (i, &s) in basis.states().iter().enumerate() {
        t.push(vec![i.to_string(), basis.format_state(i), s.count_ones().to_string()]);
    }
    out.csv("basis.csv", &t)?;
    out.json("enumerate.json", &json!({ "dim": basis.dim(), "geometry": basis.geometry() }))
}

pub fn fragment(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let spec = cfg.model()?;
    let n = if spec.family.conserves_particles() { Some(cfg.usize_req("particles")?) } else { None };
    let basis = enumerate_basis(spec.geometry, n)?;
    let report = out.time("components", || {
        let h = build_hamiltonian(&spec, &basis)?;
        Ok(connected_components(&h))
    })?;
    let coloring = color(&basis, ChiralOperator::for_family(spec.family));
    let mismatch = fragmented_mismatch(&coloring, &report)?;
    out.csv("sectors.csv", &report.to_csv(&basis))?;
    out.json(
        "fragment.json",
        &json!({
            "dim": basis.dim(),
            "sector_count": report.sector_count(),
            "summary": report.summary(),
            "mismatch": mismatch.m,
            "mismatch_fragmented": mismatch.m_frag,
            "flipped_sectors": mismatch.flipped,
        }),
    )
}

pub fn mismatch(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let coloring = color(&basis, ChiralOperator::for_family(spec.family));
    let mut record = json!({
        "dim": basis.dim(),
        "n_even": coloring.n_even,
        "n_odd": coloring.n_odd,
        "mismatch": coloring.mismatch(),
    });
    if let (Geometry::Chain { sites }, Some(n)) = (spec.geometry, basis.particles()) {
        record["full_space_formula"] = json!(mismatch_formula(sites, n, sites / 2)?);
        if sites + 2 == 3 * n {
            record["closed_form"] = json!(mismatch_closed_form(n)?);
        }
    }
    let mut t = CsvTable::new(["dim", "n_even", "n_odd", "mismatch"]);
    t.push(vec![
        basis.dim().to_string(),
        coloring.n_even.to_string(),
        coloring.n_odd.to_string(),
        coloring.mismatch().to_string(),
    ]);
    out.csv("mismatch.csv", &t)?;
    out.json("mismatch.json", &record)
}

pub fn count_zm(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let h = build_hamiltonian(&spec, &basis)?;
    let tol = cfg.f64_or("tolerance_kernel", kcmlab_core::chiral::KERNEL_TOLERANCE)?;
    let mut count = out.time("exact", || kcmlab_core::zero_mode_count(&h, CountMethod::Exact))?;
    if h.dim() <= DENSE_BUDGET {
        let numeric = out.time("numeric", || kcmlab_core::linalg::numeric_kernel_dim(&h, tol))?;
        count.numeric = Some(numeric);
        if Some(numeric) != count.exact {
            return Err(KcmError::CrossCheck(format!(
                "exact kernel dimension {} but numeric {numeric}",
                count.n_zm
            )));
        }
    }
    let m = color(&basis, ChiralOperator::for_family(spec.family)).mismatch();
    let mut t = CsvTable::new(["dim", "mismatch", "n_zm"]);
    t.push(vec![basis.dim().to_string(), m.to_string(), count.n_zm.to_string()]);
    out.csv("count_zm.csv", &t)?;
    out.json("count_zm.json", &json!({ "dim": basis.dim(), "mismatch": m, "count": count }))
}

fn padding_for(spec: &ModelSpec, v: &StateVector) -> Result<Option<PaddingSpec>> {
    if spec.family != Family::PairFlip {
        return Ok(Some(PaddingSpec::empty_sites()));
    }
    match pair_flip_padding(v) {
        (Some(l), Some(r)) => PaddingSpec::new(l, r).map(Some),
        _ => Ok(None),
    }
}

pub fn bound_states(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let h = build_hamiltonian(&spec, &basis)?;
    let q_max = cfg.usize_or("q_max", DEFAULT_Q_MAX)?;
    let zm = out.time("kernel", || zero_mode_basis(&h))?;
    let observable = ObservableSpec::boundary_for(&spec);
    let bs = out.time("discriminator", || find_bound_states(&zm, &observable))?;
    let mut t = CsvTable::new(["index", "energy", "bound", "max_residual"]);
    let mut states = Vec::new();
    for k in 0..bs.count() {
        let v = bs.vector(k)?;
        let cert = match padding_for(&spec, &v)? {
            Some(p) => Some(certify_bound(&v, &spec, &p, q_max)?),
            None => None,
        };
        t.push(vec![
            k.to_string(),
            fmt_f64(v.energy(&spec)?),
            cert.as_ref().map_or("unknown".into(), |c| c.bound.to_string()),
            cert.as_ref().map_or("".into(), |c| fmt_f64(c.max_residual())),
        ]);
        states.push(json!({ "amplitudes": v.json_amplitudes(), "certificate": cert }));
    }
    out.csv("bound_states.csv", &t)?;
    out.json(
        "bound_states.json",
        &json!({
            "dim": basis.dim(),
            "n_zm": zm.count(),
            "n_bs": bs.count(),
            "observable": observable,
            "states": states,
        }),
    )
}

pub fn factorizable(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let h = build_hamiltonian(&spec, &basis)?;
    let opts = CountOptions::for_model(&spec);
    let counts = out.time("counts", || sector_counts(&spec, &h, &opts))?;
    let mut record = json!({ "counts": counts });
    if basis.dim() <= opts.cross_check_limit {
        let zm = zero_mode_basis(&h)?;
        let span = if opts.factorize_bound_only {
            find_bound_states(&zm, opts.bound_observable.as_ref().expect("set for chains"))?
        } else {
            zm
        };
        let fs = find_factorizable(&span, spec.range)?;
        record["per_window"] = json!(fs.per_window);
        record["ratio"] = json!(fs.ratio());
    }
    let mut t = CsvTable::new(["dim", "mismatch", "n_zm", "n_bs", "n_fs"]);
    t.push(vec![
        counts.dim.to_string(),
        counts.mismatch.to_string(),
        counts.n_zm.to_string(),
        counts.n_bs.to_string(),
        counts.n_fs.to_string(),
    ]);
    out.csv("factorizable.csv", &t)?;
    out.json("factorizable.json", &record)
}

pub fn mpo_state(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let spec = MpoSpec::new(cfg.usize_or("range", 2)?, cfg.usize_req("particles")?)?;
    let v = out.time("contract", || east_west_mpo_state(spec))?;
    let residual = kcmlab_core::mpo::mpo_residual(spec, &v)?;
    let mut t = CsvTable::new(["state", "amplitude"]);
    for a in v.json_amplitudes() {
        t.push(vec![a.state, fmt_f64(a.re)]);
    }
    out.csv("mpo_state.csv", &t)?;
    out.json(
        "mpo_state.json",
        &json!({
            "range": spec.range,
            "particles": spec.particles,
            "sites": spec.sites(),
            "bond_dim": MpoSpec::BOND_DIM,
            "residual": residual,
            "amplitudes": v.json_amplitudes(),
        }),
    )
}

pub fn spectrum_task(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let h = build_hamiltonian(&spec, &basis)?;
    let with_factorizable =
        spec.geometry.is_chain() && matches!(spec.family, Family::East | Family::EastWest);
    let (report, analysis) = if with_factorizable {
        let (r, a) = out.time("spectrum", || degeneracy_analysis(&spec, &h))?;
        (r, Some(a))
    } else {
        (out.time("spectrum", || spectrum(&h))?, None)
    };
    let zero_tol = kcmlab_core::chiral::KERNEL_TOLERANCE * report.width().max(1.0);
    out.csv("spectrum.csv", &report.to_csv())?;
    out.json(
        "spectrum.json",
        &json!({
            "dim": basis.dim(),
            "width": report.width(),
            "clusters": report.clusters.len(),
            "zero_cluster": report.zero_cluster_size(zero_tol),
            "nonzero_degenerate": report.nonzero_degenerate(zero_tol),
            "chiral_asymmetry": report.chiral_asymmetry(),
            "analysis": analysis,
        }),
    )
}

fn geometry_key(g: Geometry) -> String {
    match g {
        Geometry::Chain { sites } => sites.to_string(),
        Geometry::Rectangle { lx, ly } => format!("{lx}x{ly}"),
    }
}

/// `initial = seed | east-bound | east-bound-core | north-east-f1 |
/// north-east-f2 | mpo`.
pub fn initial_state(cfg: &RunConfig) -> Result<StateVector> {
    let default = if cfg.has("seed_state") { "seed" } else { "" };
    match cfg.get("initial").unwrap_or(default) {
        "seed" => {
            let g = cfg.geometry()?;
            let bits = seed_bits(cfg, g)?.ok_or_else(|| KcmError::Domain("missing `seed_state`".into()))?;
            StateVector::product(g, bits)
        }
        "east-bound" => presets::padded_quench_state(),
        "east-bound-core" => presets::east_bound_state(),
        "north-east-f1" => {
            StateVector::product(Geometry::rectangle(5, 5)?, presets::north_east_state(presets::NORTH_EAST_F1)?)
        }
        "north-east-f2" => {
            StateVector::product(Geometry::rectangle(5, 5)?, presets::north_east_state(presets::NORTH_EAST_F2)?)
        }
        "mpo" => east_west_mpo_state(MpoSpec::new(cfg.usize_or("range", 2)?, cfg.usize_req("particles")?)?),
        "" => Err(KcmError::Domain("set `initial` or `seed_state`".into())),
        other => Err(KcmError::Parse(format!("unknown initial state `{other}`"))),
    }
}

/// Model on the lattice of `v`; `sites`, if given, must agree.
fn model_for(cfg: &RunConfig, v: &StateVector) -> Result<ModelSpec> {
    let mut c = cfg.clone();
    let key = geometry_key(v.geometry());
    match cfg.get("sites") {
        Some(s) if s != key => {
            return Err(KcmError::GeometryMismatch(format!(
                "initial state lives on {} but sites = {s}",
                v.geometry()
            )))
        }
        _ => c.set("sites", &key)?,
    }
    c.model()
}

fn observables(cfg: &RunConfig, basis: &SectorBasis) -> Result<Vec<DiagonalObservable>> {
    let g = basis.geometry();
    let Some(list) = cfg.get("observe") else { return Ok(vec![]) };
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once(':') {
            Some((x, y)) => {
                let p = |v: &str| v.parse::<usize>().map_err(|_| KcmError::Parse(format!("bad site `{s}`")));
                let (x, y) = (p(x)?, p(y)?);
                let bit = g.bit(x, y).ok_or_else(|| KcmError::Domain(format!("site {s} outside {g}")))?;
                DiagonalObservable::density(basis, bit + 1, &format!("n_{x}_{y}"))
            }
            None => {
                let i = s.parse::<usize>().map_err(|_| KcmError::Parse(format!("bad site `{s}`")))?;
                DiagonalObservable::density(basis, i, &format!("n_{i}"))
            }
        })
        .collect()
}

fn krylov(cfg: &RunConfig) -> Result<KrylovOptions> {
    let mut opts = KrylovOptions::default();
    opts.max_dim = cfg.usize_or("max_dim", opts.max_dim)?;
    Ok(opts)
}

#[derive(Serialize)]
struct QuenchSummary {
    dim: usize,
    epsilon: f64,
    fidelity_mean: f64,
    fidelity_min: f64,
    max_norm_drift: f64,
    max_energy_drift: f64,
    observable_means: Vec<(String, f64)>,
    observable_max: Vec<(String, f64)>,
}

pub fn quench(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let state = initial_state(cfg)?;
    let spec = model_for(cfg, &state)?;
    let times = cfg.times()?;
    let opts = krylov(cfg)?;
    let samples = cfg.usize_or("samples", 0)?;
    if spec.family == Family::NorthEast && samples > 0 {
        let [(start, _)] = state.amplitudes() else {
            return Err(KcmError::Domain("random-state averaging needs a product initial state".into()));
        };
        let site = match cfg.get("observe").and_then(|s| s.split_once(':')) {
            Some((x, y)) => (
                x.trim().parse().map_err(|_| KcmError::Parse("bad observe".into()))?,
                y.trim().parse().map_err(|_| KcmError::Parse("bad observe".into()))?,
            ),
            None => (2, 2),
        };
        let rng_seed = cfg.u64_or("rng_seed", 0)?;
        let q = out.time("quench", || {
            quench_northeast(&spec, *start, site, &times, samples, rng_seed, &opts)
        })?;
        let mut t = q.trace.to_csv();
        t.header.push("random_mean".into());
        for (row, v) in t.rows.iter_mut().zip(&q.random_mean) {
            row.push(fmt_f64(*v));
        }
        out.csv("quench.csv", &t)?;
        return out.json(
            "quench.json",
            &json!({
                "dim": q.sector_dim,
                "samples": q.samples,
                "rng_seed": rng_seed,
                "fidelity_average": q.fidelity_average,
                "density_average": q.density_average,
                "random_average": q.random_average,
                "infinite_temperature": q.infinite_temperature,
                "max_norm_drift": q.trace.max_norm_drift,
                "max_energy_drift": q.trace.max_energy_drift,
            }),
        );
    }
    let epsilon = cfg.f64_or("epsilon", 0.0)?;
    let basis = match state.amplitudes() {
        [(s, _)] if epsilon == 0.0 => sector_from_seed(&spec, *s)?,
        _ => {
            let ns = state.particle_numbers();
            let [n] = ns[..] else {
                return Err(KcmError::Domain("initial state mixes particle numbers".into()));
            };
            enumerate_basis(spec.geometry, Some(n))?
        }
    };
    let mut h = build_hamiltonian(&spec, &basis)?;
    if epsilon > 0.0 {
        let dh = build_perturbation(&PerturbationSpec::uncorrelated_hopping(epsilon), &spec, &basis)?;
        h = h.add_scaled(1.0, &dh, 1.0)?;
    }
    let psi0 = state.normalized()?.to_dense(&basis)?;
    let obs = observables(cfg, &basis)?;
    let trace = out.time("evolve", || evolve_checked(&h, &psi0, &times, &obs, &opts))?;
    let summary = QuenchSummary {
        dim: basis.dim(),
        epsilon,
        fidelity_mean: kcmlab_core::dynamics::mean(&trace.fidelity),
        fidelity_min: trace.fidelity.iter().copied().fold(f64::INFINITY, f64::min),
        max_norm_drift: trace.max_norm_drift,
        max_energy_drift: trace.max_energy_drift,
        observable_means: trace
            .observables
            .iter()
            .map(|(n, v)| (n.clone(), kcmlab_core::dynamics::mean(v)))
            .collect(),
        observable_max: trace
            .observables
            .iter()
            .map(|(n, v)| (n.clone(), v.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
            .collect(),
    };
    out.csv("quench.csv", &trace.to_csv())?;
    out.json("quench.json", &summary)
}

pub fn lift_scan(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let scan_cfg = LiftScanConfig {
        epsilons: cfg
            .list::<f64>("epsilon")?
            .unwrap_or_else(|| vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0]),
        delta: cfg.get("delta").map(|_| cfg.f64_or("delta", 0.0)).transpose()?,
    };
    let scan = out.time("scan", || lifting_scan(&spec, &basis, &scan_cfg))?;
    out.csv("lift_scan.csv", &scan.to_csv())?;
    out.json("lift_scan.json", &json!({ "dim": basis.dim(), "scan": scan }))
}

pub fn disorder_scan_task(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let (spec, basis) = sector_of(cfg)?;
    let gs = cfg.list::<f64>("g")?.unwrap_or_else(|| vec![0.0, 0.1, 0.5]);
    let seeds = cfg.list::<u64>("seeds")?.unwrap_or_else(|| {
        let s = cfg.u64_or("rng_seed", 1).unwrap_or(1);
        vec![s, s + 1, s + 2]
    });
    let rows = out.time("scan", || disorder_scan(&spec, &basis, &gs, &seeds))?;
    let mut t = CsvTable::new(["g", "seed", "n_zm", "n_bs"]);
    for r in &rows {
        t.push(vec![fmt_f64(r.g), r.seed.to_string(), r.n_zm.to_string(), r.n_bs.to_string()]);
    }
    out.csv("disorder_scan.csv", &t)?;
    out.json("disorder_scan.json", &json!({ "dim": basis.dim(), "rows": rows }))
}

pub fn entropy(cfg: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let v = initial_state(cfg)?;
    let cuts: Vec<usize> = match cfg.get("cut") {
        Some(_) => vec![cfg.usize_req("cut")?],
        None => (1..v.sites()).collect(),
    };
    let results = cuts.iter().map(|&c| entanglement_entropy(&v, c)).collect::<Result<Vec<_>>>()?;
    let mut t = CsvTable::new(["cut", "entropy"]);
    for r in &results {
        t.push(vec![r.cut.to_string(), fmt_f64(r.entropy)]);
    }
    out.csv("entropy.csv", &t)?;
    out.json("entropy.json", &json!({ "sites": v.sites(), "cuts": results }))
}

/// Rows `(r, N)` of the East table; `L = (r+1)N - r`.
pub fn east_rows(heavy: bool) -> Vec<(usize, usize)> {
    let mut rows = Vec::new();
    for n in 2..=10 {
        rows.push((1, n));
    }
    for n in 2..=if heavy { 9 } else { 8 } {
        rows.push((2, n));
    }
    for n in 2..=if heavy { 8 } else { 7 } {
        rows.push((3, n));
    }
    rows
}

pub fn reproduce_table(cfg: &RunConfig, variant: &str, out: &mut Artifacts) -> Result<()> {
    let heavy = matches!(cfg.get("heavy"), Some("true" | "1" | "yes"));
    let only_n = cfg.get("particles").map(|_| cfg.usize_req("particles")).transpose()?;
    let only_r = cfg.get("range").map(|_| cfg.usize_req("range")).transpose()?;
    let mut t;
    match variant {
        "east" => {
            t = CsvTable::new(["r", "N", "L", "D", "M", "N_ZM", "N_FS"]);
            for (r, n) in east_rows(heavy) {
                if only_n.is_some_and(|x| x != n) || only_r.is_some_and(|x| x != r) {
                    continue;
                }
                let l = (r + 1) * n - r;
                let spec = ModelSpec::east(r, l)?;
                let c = out.time(&format!("r{r}_n{n}"), || {
                    let basis = sector_from_seed(&spec, domain_wall(n))?;
                    let h = build_hamiltonian(&spec, &basis)?;
                    sector_counts(&spec, &h, &CountOptions::for_model(&spec))
                })?;
                t.push(
                    [r, n, l, c.dim, c.mismatch, c.n_zm, c.n_fs].iter().map(|x| x.to_string()).collect(),
                );
            }
        }
        "eastwest" | "east-west" | "east_west" => {
            let r = only_r.unwrap_or(2);
            let only_l = cfg.get("sites").map(|_| cfg.usize_req("sites")).transpose()?;
            t = CsvTable::new(["N", "L", "D", "M", "N_ZM", "N_BS", "N_FS"]);
            for n in 4..=6 {
                if only_n.is_some_and(|x| x != n) {
                    continue;
                }
                for l in (10..=17).filter(|l| only_l.is_none_or(|x| x == *l)) {
                    let spec = ModelSpec::east_west(r, l)?;
                    let c = out.time(&format!("n{n}_l{l}"), || {
                        let basis = largest_component(&spec, n)?;
                        let h = build_hamiltonian(&spec, &basis)?;
                        sector_counts(&spec, &h, &CountOptions::for_model(&spec))
                    })?;
                    t.push(
                        [n, l, c.dim, c.mismatch, c.n_zm, c.n_bs, c.n_fs]
                            .iter()
                            .map(|x| x.to_string())
                            .collect(),
                    );
                }
            }
        }
        other => {
            return Err(KcmError::Domain(format!(
                "unknown table `{other}`, expected east or eastwest"
            )))
        }
    }
    out.csv(&format!("table_{}.csv", variant.replace('-', "_")), &t)
}
