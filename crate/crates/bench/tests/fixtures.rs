use bsmf_bench::{random_endorsements, random_graph};

#[test]
fn endorsement_density_is_close() {
    let x = random_endorsements(100, 200, 0.3, 0);
    let share = x.as_slice().iter().filter(|v| **v > 0.0).count() as f64 / 20_000.0;
    assert!((share - 0.3).abs() < 0.02, "{share}");
    assert_eq!(x, random_endorsements(100, 200, 0.3, 0));
}

#[test]
fn graph_has_fixed_out_degree_and_no_self_loops() {
    let g = random_graph(50, 4, 1);
    let a = g.adjacency();
    for i in 0..50 {
        let (cols, _) = a.row(i);
        assert_eq!(cols.len(), 4);
        assert!(!cols.contains(&(i as u32)));
    }
}
