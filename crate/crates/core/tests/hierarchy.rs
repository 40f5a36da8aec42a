mod common;

use spinbus::eigensolver::{diagonalize_spec, Levels};
use spinbus::hierarchy::*;
use spinbus::spin_model::{ChainSpec, HomogeneousChain};
use spinbus::Error;

fn device(ratio: f64) -> ChainSpec {
    ChainSpec::homogeneous(&HomogeneousChain { n_couplers: 7, eps_c: 0.0, delta_c: 5.0, j_cc: ratio * 2.5, eps_q: 0.1, delta_q: 2.0, j_qc: 0.5 }).unwrap()
}

fn k_needed(ratio: f64, tol: f64) -> Option<usize> {
    convergence_sweep(&device(ratio), &GroupingPlan::device_groups(), &[1, 2, 3, 4, 5, 6, 7, 8], 4, tol).unwrap().k_meeting_tolerance
}

#[test]
fn full_plan_reproduces_exact_spectrum() {
    let spec = device(0.8);
    let exact = diagonalize_spec(&spec, Levels::All).unwrap();
    let plan = GroupingPlan::full(GroupingPlan::device_groups());
    assert!(plan.is_full());
    assert_eq!(plan.composite_dim(), 512);
    let hs = hierarchical_spectrum(&spec, &plan).unwrap();
    for (a, b) in hs.energies.iter().zip(&exact.energies) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn reduced_group_matches_subsystem_spectrum() {
    let spec = device(0.8);
    let plan = GroupingPlan::new(GroupingPlan::device_groups(), vec![2, 4, 4, 4, 2]);
    let groups = group_reduce(&spec, &plan).unwrap();
    let middle = &groups[2];
    assert_eq!(middle.sites, vec![3, 4, 5]);
    assert_eq!(middle.k(), 4);
    let brute = common::jacobi_eigenvalues(&common::brute_hamiltonian(&[0.0; 3], &[5.0; 3], &[(0, 1, 2.0), (1, 2, 2.0)]));
    for (a, b) in middle.energies.iter().zip(&brute[..4]) {
        assert!((a - b).abs() < 1e-10);
    }
    // only the boundary sites carry projected operators
    let sites: Vec<usize> = middle.z_ops.iter().map(|(s, _)| *s).collect();
    assert_eq!(sites, vec![3, 5]);
    for (_, z) in &middle.z_ops {
        assert_eq!(z.shape(), (4, 4));
        assert!((z - z.transpose()).amax() < 1e-14);
    }
}

#[test]
fn single_level_groups_give_scalar() {
    let spec = device(0.5);
    let plan = GroupingPlan::uniform(GroupingPlan::device_groups(), 1);
    let groups = group_reduce(&spec, &plan).unwrap();
    let h = assemble_composite(&groups, &inter_group_edges(&spec, &plan)).unwrap();
    assert_eq!(h.shape(), (1, 1));
    let expect: f64 = groups.iter().map(|g| g.energies[0]).sum::<f64>()
        + inter_group_edges(&spec, &plan).iter().map(|e| {
            let z = |s: usize| groups.iter().find_map(|g| g.z_ops.iter().find(|(x, _)| *x == s).map(|(_, m)| m[(0, 0)])).unwrap();
            e.j * z(e.a) * z(e.b)
        }).sum::<f64>();
    assert!((h[(0, 0)] - expect).abs() < 1e-12);
}

#[test]
fn decoupled_groups_add() {
    let spec = ChainSpec::homogeneous(&HomogeneousChain { n_couplers: 7, eps_c: 0.0, delta_c: 5.0, j_cc: 1.0, eps_q: 0.0, delta_q: 2.0, j_qc: 0.0 })
        .unwrap()
        .with_coupling(2, 3, 0.0)
        .with_coupling(5, 6, 0.0);
    let groups = GroupingPlan::device_groups();
    let hs = hierarchical_spectrum(&spec, &GroupingPlan::uniform(groups.clone(), 2)).unwrap();
    let g0: f64 = groups.iter().map(|g| diagonalize_spec(&spec.subsystem(g).unwrap(), Levels::Lowest(1)).unwrap().ground_energy()).sum();
    assert!((hs.ground_energy() - g0).abs() < 1e-10);
    let exact = diagonalize_spec(&spec, Levels::Lowest(1)).unwrap();
    assert!((exact.ground_energy() - g0).abs() < 1e-10);
}

#[test]
fn error_shrinks_with_k() {
    let t = convergence_sweep(&device(0.5), &GroupingPlan::device_groups(), &[1, 2, 3, 4, 6, 8], 4, 1e-3).unwrap();
    for w in t.rows.windows(2) {
        assert!(w[1].ground_error <= w[0].ground_error + 1e-12, "{:?}", t.rows);
    }
    let last = t.rows.last().unwrap();
    assert!(last.max_error < 1e-8);
    assert!(t.rows.iter().all(|r| r.variational_ok));
}

#[test]
fn strong_coupling_needs_more_levels() {
    let weak = k_needed(0.2, 1e-3).unwrap();
    let strong = k_needed(2.0, 1e-3).unwrap();
    assert!(strong > weak, "weak {weak}, strong {strong}");
}

#[test]
fn truncation_is_variational() {
    for ratio in [0.2, 1.0, 2.0] {
        let t = convergence_sweep(&device(ratio), &GroupingPlan::device_groups(), &[1, 2, 3, 5], 1, 1.0).unwrap();
        assert!(t.rows.iter().all(|r| r.variational_ok && r.ground_error >= -1e-9), "ratio {ratio}");
    }
}

#[test]
fn plan_validation() {
    let n = 9;
    let bad = [
        GroupingPlan::new(vec![vec![0, 1], vec![2]], vec![2]),
        GroupingPlan::new(vec![vec![0], vec![2, 1], vec![3, 4, 5, 6, 7]], vec![1, 1, 1]),
        GroupingPlan::new(vec![vec![0, 2], vec![1, 3, 4, 5, 6, 7, 8]], vec![1, 1]),
        GroupingPlan::new(vec![vec![0, 1, 2, 3, 4, 5, 6, 7]], vec![1]),
        GroupingPlan::new(vec![vec![0], vec![1, 2, 3, 4, 5, 6, 7, 8]], vec![0, 1]),
        GroupingPlan::new(vec![vec![0], vec![1, 2, 3, 4, 5, 6, 7, 8]], vec![3, 1]),
        GroupingPlan::new(vec![vec![], vec![0, 1, 2, 3, 4, 5, 6, 7, 8]], vec![1, 1]),
    ];
    for p in &bad {
        assert!(matches!(p.validate(n), Err(Error::InvalidPlan(_))), "{p:?}");
    }
    assert!(GroupingPlan::uniform(vec![vec![0], vec![2, 1], vec![3, 4, 5, 6, 7, 8]], 2).validate(n).is_ok());
}
