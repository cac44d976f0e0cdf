mod common;

use std::time::Duration;

use rand::Rng;
use robsd::oracles::{ExternalOracle, KruskalOracle, OracleError};
use robsd::{Fixings, Graph, Instance, LinearOracle, ProblemKind, ScenarioSet, Vertex};

fn k3() -> Instance<f64> {
    let u = ScenarioSet::from_costs(vec![vec![1.0, 2.0, 3.0]]).unwrap();
    Instance::new("k3", ProblemKind::Mst, Some(Graph::complete(3)), u).unwrap()
}

// drops the edge Kruskal would consider last: largest cost, highest index on ties
const K3_KRUSKAL: &str = r#"awk 'NR==2{m=1; for(i=2;i<=3;i++) if($i+0>=$m+0) m=i; for(i=1;i<=3;i++) printf "%s%s", (i==m?0:1), (i<3?" ":"\n")}'"#;

#[test]
fn fixed_answer_is_accepted() {
    let o = ExternalOracle::for_instance("echo 1 1 0", &k3());
    let v = o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()).unwrap();
    assert_eq!(v, Some(Vertex::from_ones(3, &[0, 1])));
}

#[test]
fn answer_violating_fixing_is_rejected() {
    let o = ExternalOracle::for_instance("echo 1 1 0", &k3());
    let fix = Fixings::new().with(0, false).unwrap();
    assert!(matches!(
        o.minimize(&[1.0, 2.0, 3.0], &fix),
        Err(OracleError::Protocol(_))
    ));
}

#[test]
fn non_tree_is_rejected() {
    let o = ExternalOracle::for_instance("echo 1 0 0", &k3());
    assert!(matches!(
        o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()),
        Err(OracleError::InvalidVertex(_))
    ));
}

#[test]
fn infeasible_and_garbage_responses() {
    let o = ExternalOracle::for_instance("echo INFEASIBLE", &k3());
    assert_eq!(o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()).unwrap(), None);
    let o = ExternalOracle::for_instance("echo 1 2", &k3());
    assert!(matches!(
        o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()),
        Err(OracleError::Protocol(_))
    ));
    let o = ExternalOracle::for_instance("exit 3", &k3());
    assert!(o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()).is_err());
}

#[test]
fn slow_command_times_out() {
    let o = ExternalOracle::for_instance("sleep 5", &k3()).with_timeout(Duration::from_millis(200));
    assert!(matches!(
        o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()),
        Err(OracleError::Timeout(_))
    ));
}

#[test]
fn awk_kruskal_matches_internal() {
    let inst = k3();
    let ext = ExternalOracle::for_instance(K3_KRUSKAL, &inst);
    let int = KruskalOracle::for_instance(&inst).unwrap();
    let mut r = common::rng(4);
    for _ in 0..20 {
        let costs: Vec<f64> = (0..3).map(|_| (r.random_range(0..6) as f64) * 0.5 - 1.0).collect();
        let a = ext.minimize(&costs, &Fixings::new()).unwrap();
        let b = LinearOracle::<f64>::minimize(&int, &costs, &Fixings::new()).unwrap();
        assert_eq!(a, b, "costs {costs:?}");
    }
}

#[test]
fn request_carries_fixings() {
    // the stub echoes back the fixing count from the header as a 0/1 pattern
    let o = ExternalOracle::for_instance(
        r#"read n k; if [ "$k" = 1 ]; then echo 0 1 1; else echo 1 1 0; fi"#,
        &k3(),
    );
    let fix = Fixings::new().with(2, true).unwrap();
    assert_eq!(
        o.minimize(&[1.0, 2.0, 3.0], &fix).unwrap(),
        Some(Vertex::from_ones(3, &[1, 2]))
    );
    assert_eq!(
        o.minimize(&[1.0, 2.0, 3.0], &Fixings::new()).unwrap(),
        Some(Vertex::from_ones(3, &[0, 1]))
    );
}
