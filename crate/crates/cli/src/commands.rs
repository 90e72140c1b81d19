use std::collections::BTreeMap;
use std::io::Read;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use spbuild::fq_symplectic::*;
use spbuild::graph::*;
use spbuild::lattices::*;
use spbuild::spectral::*;

use crate::output::{dot_graph, key_hash, Report, Table};
use crate::{CliError, GraphKind, Method, RunConfig};

fn read_source(src: &str) -> Result<String, CliError> {
    let trimmed = src.trim_start();
    if trimmed.starts_with('{') {
        return Ok(src.to_string());
    }
    if src == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(src).map_err(|e| CliError::Input(format!("cannot read vertex file {src}: {e}")))
}

fn header(c: &RunConfig) -> Value {
    json!({ "p": c.p, "e": c.e, "q": c.p.pow(c.e), "n": c.n })
}

fn with_header(c: &RunConfig, body: Value) -> Value {
    let mut v = header(c);
    if let (Value::Object(h), Value::Object(b)) = (&mut v, body) {
        h.extend(b);
    }
    v
}

fn special_graph(c: &RunConfig) -> Result<SpecialGraph, CliError> {
    Ok(SpecialGraph::new(c.space()?, c.max_subspaces)?)
}

fn sl_graph(c: &RunConfig) -> Result<SlGraph, CliError> {
    let sp = c.space()?;
    Ok(SlGraph::new(sp.field, 2 * c.n, sp.window, c.max_subspaces)?)
}

pub fn neighbors(c: &RunConfig, vertex: Option<&str>) -> Result<Report, CliError> {
    let g = special_graph(c)?;
    let sp = g.space();
    let f = &sp.field;
    let v = match vertex {
        None => g.origin(),
        Some(src) => {
            let value: Value = serde_json::from_str(&read_source(src)?)
                .map_err(|e| CliError::Input(format!("vertex is not valid JSON: {e}")))?;
            let l = Lattice::from_json(&value, f)?;
            if l.n() != c.n {
                return Err(CliError::Input(format!("vertex has n = {} but --n is {}", l.n(), c.n)));
            }
            vertex_key(&l, sp)?
        }
    };
    let nbrs = g.neighbors(&v)?;
    let mut table = Table::new(&["index", "mu_parity", "matrix"]);
    for (i, w) in nbrs.iter().enumerate() {
        table.push(vec![i.to_string(), w.mu_parity().to_string(), w.key_string(f)]);
    }
    let mut labels = vec![key_hash(&v.key_string(f))];
    labels.extend(nbrs.iter().map(|w| key_hash(&w.key_string(f))));
    let parity: Vec<u8> = std::iter::once(&v).chain(&nbrs).map(|w| w.mu_parity()).collect();
    let star: Vec<Vec<usize>> = std::iter::once((1..=nbrs.len()).collect())
        .chain((0..nbrs.len()).map(|_| vec![0]))
        .collect();
    Ok(Report {
        json: with_header(
            c,
            json!({
                "vertex": v.to_json(f),
                "degree": nbrs.len(),
                "neighbors": nbrs.iter().map(|w| w.to_json(f)).collect::<Vec<_>>(),
            }),
        ),
        table: Some(table),
        dot: Some(dot_graph("neighbors", &labels, Some(&parity), &star)),
        failures: Vec::new(),
    })
}

pub fn ball(c: &RunConfig) -> Result<Report, CliError> {
    let g = special_graph(c)?;
    let f = &g.space().field;
    let b = spbuild::graph::ball(&g, g.origin(), c.radius, c.max_vertices)?;
    b.parity_classes()?;
    let mut table = Table::new(&["index", "layer", "mu_parity", "degree", "matrix"]);
    let mut vertices = Vec::with_capacity(b.len());
    for (i, v) in b.vertices.iter().enumerate() {
        let key = v.key_string(f);
        table.push(vec![
            i.to_string(),
            b.layer[i].to_string(),
            v.mu_parity().to_string(),
            b.adjacency[i].len().to_string(),
            key,
        ]);
        vertices.push(json!({
            "index": i,
            "layer": b.layer[i],
            "mu_parity": v.mu_parity(),
            "matrix": v.to_json(f)["matrix"].clone(),
        }));
    }
    let edges: Vec<[usize; 2]> = b
        .adjacency
        .iter()
        .enumerate()
        .flat_map(|(i, a)| a.iter().filter(move |&&j| j > i).map(move |&j| [i, j]))
        .collect();
    let labels: Vec<String> = b.vertices.iter().map(|v| key_hash(&v.key_string(f))).collect();
    let parity: Vec<u8> = b.vertices.iter().map(|v| v.mu_parity()).collect();
    Ok(Report {
        json: with_header(
            c,
            json!({
                "radius": c.radius,
                "center": b.center_index(),
                "vertex_count": b.len(),
                "edge_count": b.edge_count(),
                "growth": growth_json(&b),
                "vertices": vertices,
                "edges": edges,
                "layers": b.layer,
            }),
        ),
        table: Some(table),
        dot: Some(dot_graph("ball", &labels, Some(&parity), &b.adjacency)),
        failures: Vec::new(),
    })
}

pub fn apartment(c: &RunConfig) -> Result<Report, CliError> {
    let g = special_graph(c)?;
    let sp = g.space();
    let a = apartment_ball(c.n, c.radius)?;
    let mut bad = 0;
    for (i, v) in a.vertices.iter().enumerate() {
        if a.layer[i] == a.radius {
            continue;
        }
        let nbrs = g.neighbors(&vertex_key(&v.lattice(), sp)?)?;
        for &j in &a.adjacency[i] {
            let w = vertex_key(&a.vertices[j].lattice(), sp)?;
            if nbrs.binary_search(&w).is_err() {
                bad += 1;
            }
        }
    }
    let mut table = Table::new(&["index", "layer", "mu", "a"]);
    for (i, v) in a.vertices.iter().enumerate() {
        let coords: Vec<String> = v.a.iter().map(i64::to_string).collect();
        table.push(vec![i.to_string(), a.layer[i].to_string(), v.mu.to_string(), coords.join(" ")]);
    }
    let labels: Vec<String> = a.vertices.iter().map(|v| format!("{:?};{}", v.a, v.mu)).collect();
    let parity: Vec<u8> = a.vertices.iter().map(|v| v.mu).collect();
    Ok(Report {
        json: with_header(
            c,
            json!({
                "radius": c.radius,
                "vertices": a.vertices.iter().enumerate().map(|(i, v)| json!({"a": v.a, "mu": v.mu, "layer": a.layer[i]})).collect::<Vec<_>>(),
                "adjacency": a.adjacency,
                "degree": 1usize << c.n,
                "embedding_ok": bad == 0,
                "edges_missing_in_building": bad,
            }),
        ),
        table: Some(table),
        dot: Some(dot_graph("apartment", &labels, Some(&parity), &a.adjacency)),
        failures: if bad == 0 { vec![] } else { vec!["apartment_embedding".into()] },
    })
}

/// Orbit sizes keyed by signature, plus the neighbor counts of the origin per signature.
fn orbit_data(c: &RunConfig) -> Result<(BTreeMap<EpsilonSignature, BigUint>, BTreeMap<EpsilonSignature, usize>), CliError> {
    let f = c.field()?;
    let orbits = borel_orbits(c.n, &f, c.max_subspaces)?;
    let sizes = orbits.iter().map(|(s, m)| (s.clone(), BigUint::from(m.len()))).collect();
    let g = special_graph(c)?;
    let mut by_sig = BTreeMap::new();
    for (u, _) in g.labelled_neighbors(&g.origin())? {
        *by_sig.entry(signature(&u, &f)?).or_insert(0) += 1;
    }
    Ok((sizes, by_sig))
}

pub fn orbits(c: &RunConfig) -> Result<Report, CliError> {
    let q = c.field()?.q();
    let (sizes, by_sig) = orbit_data(c)?;
    let half = BigUint::from(q).pow((c.n * (c.n + 1) / 2) as u32);
    let mut table = Table::new(&[
        "epsilon", "m", "M", "size", "predicted", "complement_size", "product", "expected_product", "neighbors", "ok",
    ]);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (sig, size) in &sizes {
        let predicted = BigUint::from(q).pow(sig.orbit_exponent() as u32);
        let other = sizes.get(&sig.complement()).cloned().unwrap_or_default();
        let product = size * &other;
        let nbrs = by_sig.get(sig).copied().unwrap_or(0);
        let ok = *size == predicted && product == half && BigUint::from(nbrs) == *size;
        if !ok {
            failures.push(format!("orbit_{}", sig.label()));
        }
        table.push(vec![
            sig.label(),
            sig.m().to_string(),
            sig.big_m().to_string(),
            size.to_string(),
            predicted.to_string(),
            other.to_string(),
            product.to_string(),
            half.to_string(),
            nbrs.to_string(),
            ok.to_string(),
        ]);
        rows.push(json!({
            "epsilon": sig.label(),
            "m": sig.m(),
            "M": sig.big_m(),
            "size": json_uint(size),
            "predicted": json_uint(&predicted),
            "complement_size": json_uint(&other),
            "product": json_uint(&product),
            "neighbors": nbrs,
            "ok": ok,
        }));
    }
    let total: BigUint = sizes.values().sum();
    let expected = lagrangian_count_closed(c.n as u32, q);
    if total != expected {
        failures.push("orbit_partition".into());
    }
    Ok(Report {
        json: with_header(
            c,
            json!({
                "lagrangians": json_uint(&total),
                "expected_lagrangians": json_uint(&expected),
                "expected_product": json_uint(&half),
                "orbits": rows,
            }),
        ),
        table: Some(table),
        dot: None,
        failures,
    })
}

pub fn rho(c: &RunConfig, method: Method) -> Result<Report, CliError> {
    let q = c.field()?.q();
    let n = c.n as u32;
    let wants = |m: Method| method == m || method == Method::All;
    let rho_orbit_sum = if wants(Method::OrbitSum) { Some(spbuild::spectral::rho_orbit_sum(c.n, q)?) } else { None };
    let mut power_iter = Vec::new();
    let mut walk_bounds = Vec::new();
    if wants(Method::Power) || wants(Method::Walk) {
        let g = special_graph(c)?;
        let mut last = None;
        let radii: Vec<usize> = if wants(Method::Power) { (1..=c.radius).collect() } else { vec![c.radius] };
        for r in radii {
            let b = spbuild::graph::ball(&g, g.origin(), r, c.max_vertices)?;
            if wants(Method::Power) {
                power_iter.push((r, power_iteration(&b, DEFAULT_TOL)?));
            }
            last = Some(b);
        }
        if let (true, Some(b)) = (wants(Method::Walk), last) {
            if c.radius > 0 {
                walk_bounds = return_probabilities(&b, g.degree(), c.radius, DEFAULT_EXACT_WALK_STEPS)?;
            }
        }
    }
    let report = SpectralReport {
        n: c.n,
        q,
        rho_closed: rho_closed(n, q),
        degree: degree_closed(n, q),
        rho_orbit_sum,
        power_iter,
        walk_bounds,
        inequality_ok: expansion_inequality(n, q).2,
    };
    let mut json = report.to_json();
    json["method"] = json!(format!("{method:?}").to_lowercase());
    Ok(Report {
        json: with_header(c, json),
        table: None,
        dot: None,
        failures: report.failed_invariants(),
    })
}

struct Check {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn check(name: &'static str, ok: bool, detail: impl Into<String>) -> Check {
    Check { name, ok, detail: detail.into() }
}

/// Random similitudes applied to the origin and a neighbor keep both special
/// and adjacent.
fn action_check(c: &RunConfig, samples: usize) -> Result<Check, CliError> {
    let mut sp = c.space()?;
    sp.window = sp.window.max(24);
    let g = SpecialGraph::new(sp, c.max_subspaces)?;
    let sp = g.space();
    let o = g.origin();
    let nbrs = g.neighbors(&o)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut broken = 0;
    for _ in 0..samples {
        let s = random_similitude(c.n, 4, &mut rng, &sp.field);
        let w = &nbrs[rng.gen_range(0..nbrs.len())];
        let (go, gw) = (act(&s, &o, sp)?, act(&s, w, sp)?);
        if !(go.is_special() && gw.is_special() && g.neighbors(&go)?.binary_search(&gw).is_ok()) {
            broken += 1;
        }
    }
    Ok(check("group_action", broken == 0, format!("{samples} seeded similitudes, {broken} broken edges")))
}

pub fn verify(c: &RunConfig, grid: bool, inject_fault: bool) -> Result<Report, CliError> {
    let f = c.field()?;
    let q = f.q();
    let n = c.n as u32;
    let mut checks = Vec::new();

    let g = special_graph(c)?;
    let found = g.neighbors_checked(&g.origin())?.len();
    let degree = degree_closed(n, q);
    checks.push(check("degree", BigUint::from(found) == degree, format!("enumerated {found}, closed form {degree}")));

    let chambers = count_isotropic_flags(c.n, &f, c.max_subspaces)?;
    let per_edge = count_full_flags(c.n, &f, c.max_subspaces)?;
    let closed = isotropic_flag_count_closed(n, q);
    checks.push(check(
        "chambers",
        chambers == closed && chambers == &per_edge * BigUint::from(found),
        format!("counted {chambers}, closed form {closed}, {per_edge} per edge x {found} edges"),
    ));

    let (mut sizes, by_sig) = orbit_data(c)?;
    if inject_fault {
        if let Some(first) = sizes.values_mut().next() {
            *first += 1u32;
        }
    }
    let wrong: Vec<String> = sizes
        .iter()
        .filter(|(s, size)| **size != BigUint::from(q).pow(s.orbit_exponent() as u32))
        .map(|(s, _)| s.label())
        .collect();
    checks.push(check("orbit_sizes", wrong.is_empty(), format!("{} orbits, mismatched [{}]", sizes.len(), wrong.join(" "))));
    let half = BigUint::from(q).pow((c.n * (c.n + 1) / 2) as u32);
    let products_ok = sizes.iter().all(|(s, size)| sizes.get(&s.complement()).is_some_and(|o| size * o == half));
    checks.push(check("orbit_products", products_ok, format!("each size times its complement is {half}")));
    let sig_ok = sizes.iter().all(|(s, size)| BigUint::from(by_sig.get(s).copied().unwrap_or(0)) == *size);
    checks.push(check("neighbor_signatures", sig_ok, "origin neighbors grouped by signature"));

    let (lhs, rhs) = lagrangian_identity_sides(n, q);
    checks.push(check("product_sum_identity", lhs == rhs, format!("{lhs} = {rhs}")));
    let rho = rho_closed(n, q);
    let symbolic = spbuild::spectral::rho_orbit_sum(c.n, q)?;
    checks.push(check("orbit_sum_symbolic", symbolic == rho, format!("{symbolic} vs {rho}")));
    let (ok, detail) = match rho_orbit_sum_from_cards(q, &sizes) {
        Ok(s) => (s == rho, format!("{s} from enumerated orbits")),
        Err(e) => (false, e.to_string()),
    };
    checks.push(check("orbit_sum_enumerated", ok, detail));
    let (lhs4, rhs4, ok) = expansion_inequality(n, q);
    checks.push(check("inequality", ok, format!("{lhs4} < {rhs4}")));
    checks.push(action_check(c, 20)?);

    let mut grid_table = Table::new(&["n", "p", "i", "q", "lhs4", "rhs4", "ok"]);
    let mut grid_rows = Vec::new();
    if grid {
        let mut all = true;
        for gn in 2..=5u32 {
            for p in [2u64, 3, 5, 7, 11] {
                for i in 1..=5u32 {
                    let gq = p.pow(i);
                    let (l, r, ok) = expansion_inequality(gn, gq);
                    all &= ok;
                    grid_table.push(vec![gn.to_string(), p.to_string(), i.to_string(), gq.to_string(), l.to_string(), r.to_string(), ok.to_string()]);
                    grid_rows.push(json!({"n": gn, "p": p, "i": i, "q": gq, "lhs4": json_uint(&l), "rhs4": json_uint(&r), "ok": ok}));
                }
            }
        }
        checks.push(check("inequality_grid", all, format!("{} grid points", grid_rows.len())));
    }

    let failures: Vec<String> = checks.iter().filter(|k| !k.ok).map(|k| k.name.to_string()).collect();
    let table = if grid {
        grid_table
    } else {
        let mut t = Table::new(&["check", "ok", "detail"]);
        for k in &checks {
            t.push(vec![k.name.into(), k.ok.to_string(), k.detail.clone()]);
        }
        t
    };
    let mut json = json!({
        "seed": c.seed,
        "passed": failures.is_empty(),
        "checks": checks.iter().map(|k| json!({"name": k.name, "ok": k.ok, "detail": k.detail})).collect::<Vec<_>>(),
    });
    if grid {
        json["grid"] = json!(grid_rows);
    }
    Ok(Report {
        json: with_header(c, json),
        table: Some(table),
        dot: None,
        failures,
    })
}

fn growth_json<V>(b: &BallGraph<V>) -> Value {
    json!(b
        .growth_table()
        .iter()
        .map(|(i, size, root)| json!({"i": i, "ball_size": size, "root": root}))
        .collect::<Vec<_>>())
}

fn growth_report(c: &RunConfig, graph: &str, table: Vec<(usize, usize, Option<f64>)>, estimate: Option<f64>) -> Report {
    let mut t = Table::new(&["i", "ball_size", "root"]);
    for (i, size, root) in &table {
        t.push(vec![i.to_string(), size.to_string(), root.map_or(String::new(), |r| r.to_string())]);
    }
    Report {
        json: with_header(
            c,
            json!({
                "graph": graph,
                "radius": c.radius,
                "growth": table.iter().map(|(i, s, r)| json!({"i": i, "ball_size": s, "root": r})).collect::<Vec<_>>(),
                "growth_constant_estimate": estimate,
            }),
        ),
        table: Some(t),
        dot: None,
        failures: Vec::new(),
    }
}

pub fn growth(c: &RunConfig, graph: GraphKind) -> Result<Report, CliError> {
    Ok(match graph {
        GraphKind::Special => {
            let g = special_graph(c)?;
            let b = spbuild::graph::ball(&g, g.origin(), c.radius, c.max_vertices)?;
            growth_report(c, "special", b.growth_table(), b.growth_constant_estimate())
        }
        GraphKind::Sl => {
            let g = sl_graph(c)?;
            let b = spbuild::graph::ball(&g, g.origin(), c.radius, c.max_vertices)?;
            growth_report(c, "sl", b.growth_table(), b.growth_constant_estimate())
        }
        GraphKind::Apartment => {
            let b = apartment_ball(c.n, c.radius)?;
            growth_report(c, "apartment", b.growth_table(), b.growth_constant_estimate())
        }
    })
}

pub fn compare(c: &RunConfig) -> Result<Report, CliError> {
    let q = c.field()?.q();
    let n = c.n as u32;
    let y = special_graph(c)?;
    let x = sl_graph(c)?;
    let (dy, dx) = (degree_closed(n, q), sl_degree(2 * n, q));
    let (ey, ex) = (y.neighbors(&y.origin())?.len(), x.neighbors(&x.origin())?.len());
    let rho = rho_closed(n, q);
    let mut rows = Vec::new();
    let (mut gy, mut gx) = (None, None);
    let mut exceeded_at = None;
    for r in 1..=c.radius {
        let by = spbuild::graph::ball(&y, y.origin(), r, c.max_vertices)?;
        let bx = spbuild::graph::ball(&x, x.origin(), r, c.max_vertices)?;
        let (py, px) = (power_iteration(&by, DEFAULT_TOL)?, power_iteration(&bx, DEFAULT_TOL)?);
        if px > rho.to_f64() && exceeded_at.is_none() {
            exceeded_at = Some(r);
        }
        gy = by.growth_constant_estimate();
        gx = bx.growth_constant_estimate();
        rows.push(json!({
            "radius": r,
            "sp_ball_size": by.len(),
            "sl_ball_size": bx.len(),
            "sp_estimate": py,
            "sl_estimate": px,
        }));
    }
    let mut failures = Vec::new();
    if BigUint::from(ey) != dy || BigUint::from(ex) != dx {
        failures.push("degree_enumeration".into());
    }
    if dy >= dx {
        failures.push("degree_comparison".into());
    }
    let verdict = match exceeded_at {
        Some(r) => format!("SL lower bound exceeds the Sp spectral radius at radius {r}"),
        None => format!("inconclusive up to radius {}", c.radius),
    };
    Ok(Report {
        json: with_header(
            c,
            json!({
                "sp_degree": json_uint(&dy),
                "sl_degree": json_uint(&dx),
                "sp_degree_enumerated": ey,
                "sl_degree_enumerated": ex,
                "sp_rho": rho.to_json(),
                "balls": rows,
                "sl_bound_exceeds_sp_rho": exceeded_at.is_some(),
                "verdict": verdict,
                "growth_constant_estimates": {"sp": gy, "sl": gx},
            }),
        ),
        table: None,
        dot: None,
        failures,
    })
}
