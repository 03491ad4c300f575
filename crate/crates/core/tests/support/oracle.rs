//! Exhaustive optimum over every station set and every vehicle placement,
//! computed directly from the instance data with bit masks.

use ambloc::coverage::Prepared;
use ambloc::formulation::ModelKind;
use ambloc::rational::Rational;
use num_traits::Zero;

/// Value of point `i` for type `u` in evaluation slot `slot` when `n`
/// vehicles of that type reach it.
fn point_value(p: &Prepared, kind: ModelKind, is_static: bool, i: usize, u: usize, slot: usize, n: u32) -> Rational {
    if n == 0 {
        return Rational::zero();
    }
    let inst = &p.instance;
    let periods: Vec<usize> = if is_static { (0..inst.num_periods).collect() } else { vec![slot] };
    match kind {
        ModelKind::Deterministic => periods.iter().map(|&t| *inst.demand(i, u, t)).sum(),
        ModelKind::Probabilistic => (1..=n.min(inst.k_max))
            .map(|k| periods.iter().map(|&t| inst.demand(i, u, t) * p.table.q(i, u, k, t)).sum::<Rational>())
            .max()
            .unwrap(),
    }
}

/// Best objective over all plans with at most `eps` stations that open every
/// site in `must_open`; `None` when no such station set exists.
pub fn optimum(
    p: &Prepared,
    kind: ModelKind,
    is_static: bool,
    eps: Option<usize>,
    must_open: &[usize],
) -> Option<Rational> {
    let inst = &p.instance;
    let n_sites = inst.num_sites();
    assert!(n_sites <= 12);
    let full = 1usize << n_sites;
    let slots = if is_static { 1 } else { inst.num_periods };
    let cover: Vec<Vec<usize>> = (0..inst.num_points())
        .map(|i| (0..inst.num_types()).map(|u| p.sets.covers(i, u).iter().fold(0, |m, &j| m | 1 << j)).collect())
        .collect();
    let must: usize = must_open.iter().fold(0, |m, &j| m | 1 << j);

    // g[slot][O]: best value in this slot using only sites in O.
    let mut per_slot: Vec<Vec<Rational>> = Vec::new();
    for slot in 0..slots {
        let values: Vec<Vec<Option<Rational>>> = (0..inst.num_types())
            .map(|u| {
                let fleet = inst.ambulance_types[u].fleet_size;
                (0..full)
                    .map(|s: usize| {
                        (s.count_ones() <= fleet).then(|| {
                            (0..inst.num_points())
                                .map(|i| point_value(p, kind, is_static, i, u, slot, (s & cover[i][u]).count_ones()))
                                .sum()
                        })
                    })
                    .collect()
            })
            .collect();
        let mut best: Vec<Option<Rational>> = vec![None; full];
        // walk every tuple of per-type site sets
        let mut choice = vec![0usize; inst.num_types()];
        loop {
            if choice.iter().enumerate().all(|(u, &s)| values[u][s].is_some()) {
                let fits = (0..n_sites).all(|j| {
                    choice.iter().filter(|&&s| s >> j & 1 == 1).count() as u32 <= inst.sites[j].capacity
                });
                if fits {
                    let union = choice.iter().fold(0, |m, &s| m | s);
                    let v: Rational = choice.iter().enumerate().map(|(u, &s)| values[u][s].unwrap()).sum();
                    if best[union].map_or(true, |b| v > b) {
                        best[union] = Some(v);
                    }
                }
            }
            let mut u = 0;
            loop {
                if u == choice.len() {
                    break;
                }
                choice[u] += 1;
                if choice[u] < full {
                    break;
                }
                choice[u] = 0;
                u += 1;
            }
            if u == choice.len() {
                break;
            }
        }
        let mut g: Vec<Rational> = best.into_iter().map(|b| b.unwrap_or_else(Rational::zero)).collect();
        for bit in 0..n_sites {
            for m in 0..full {
                if m >> bit & 1 == 1 {
                    let sub = g[m ^ 1 << bit];
                    if sub > g[m] {
                        g[m] = sub;
                    }
                }
            }
        }
        per_slot.push(g);
    }
    (0..full)
        .filter(|&o| o & must == must && eps.map_or(true, |e| o.count_ones() as usize <= e))
        .map(|o| per_slot.iter().map(|g| g[o]).sum::<Rational>())
        .max()
}
