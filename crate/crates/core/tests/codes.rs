use qcising::qc::{enumerate_cycles, girth, lift, optimize_lift, Family, LiftTargets, MetProtograph};
use qcising::topo::{invariant_report, TrappingSet};

fn protograph(name: &str) -> MetProtograph {
    let path = format!("{}/assets/{name}", env!("CARGO_MANIFEST_DIR"));
    MetProtograph::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bundled_protographs_lift() {
    let h1 = lift(&protograph("h1.txt"));
    assert_eq!((h1.n_checks(), h1.n_vars(), h1.edges().len()), (14, 21, 42));
    assert_eq!(h1.family(), Family::Toroidal);

    let p2 = protograph("h2.txt");
    assert_eq!(p2.circulant_size(), 41);
    let h2 = lift(&p2);
    let cells: usize = (0..p2.rows()).flat_map(|r| (0..p2.cols()).map(move |c| (r, c))).map(|(r, c)| p2.cell(r, c).len()).sum();
    assert_eq!(h2.edges().len(), 41 * cells);

    let p3 = protograph("h3.txt");
    let h3 = lift(&p3);
    assert_eq!(h3.family(), Family::Spherical);
    assert!(h3.var_degrees().iter().all(|&d| d == 15));
    assert!(h3.check_degrees().iter().all(|&d| d == 15));
}

#[test]
fn girth_agrees_with_cycle_enumeration() {
    let h1 = lift(&protograph("h1.txt"));
    let g = girth(&h1).unwrap();
    assert!(enumerate_cycles(&h1, g - 2).unwrap().is_empty());
    let shortest = enumerate_cycles(&h1, g).unwrap();
    assert!(!shortest.is_empty() && shortest.iter().all(|c| c.len() == g));
}

#[test]
fn trapping_set_from_lifted_code() {
    let h1 = lift(&protograph("h1.txt"));
    // The variables of a shortest cycle induce a trapping set with no isolated checks.
    let cycle = &enumerate_cycles(&h1, girth(&h1).unwrap()).unwrap()[0];
    let mut vars: Vec<usize> = cycle.vertices.iter().copied().filter(|&u| h1.is_var_vertex(u)).collect();
    vars.sort_unstable();
    let ts = TrappingSet::from_tanner(&h1, &vars).unwrap();
    assert_eq!(ts.a(), vars.len());
    let report = invariant_report(&ts).unwrap();
    assert_eq!(report.betti0, 1);
    assert!(report.cycle_rank >= 1);
    assert!(report.rho > 0.0 && (report.r_crit * report.r_crit - report.rho).abs() < 1e-9);
}

#[test]
fn optimizer_output_meets_reported_girth() {
    let base = vec![vec![1, 1, 1], vec![1, 1, 1]];
    let res = optimize_lift(&base, 13, &LiftTargets::new(8, 0), 4).unwrap();
    let tanner = lift(&res.protograph);
    assert_eq!(girth(&tanner), res.girth);
    if res.satisfied {
        assert!(res.girth.is_none_or(|g| g >= 8));
    }
}
