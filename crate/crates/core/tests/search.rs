use ems_charting::codebook::{
    exhaustive_search, greedy_search, panel_codebook, single_panel_sweep, Pipeline, PipelineParams, SearchParams,
};
use ems_charting::embedding::TsneParams;
use ems_charting::metrics::MetricParams;
use ems_charting::scene::parse_scene;
use ems_charting::Error;

mod common;
use common::TINY;



fn pipeline() -> Pipeline {
    let scene = parse_scene(TINY, "tiny").unwrap();
    let params = PipelineParams {
        tsne: TsneParams { perplexity: 5.0, iterations: 30, ..TsneParams::default() },
        metrics: MetricParams { kappa: 2, ..MetricParams::default() },
        ..PipelineParams::default()
    };
    Pipeline::new(&scene, params).unwrap()
}

fn books(p: &Pipeline, k: usize) -> Vec<ems_charting::codebook::Codebook> {
    p.scene().panels.iter().map(|q| panel_codebook(q, k).unwrap()).collect()
}

#[test]
fn eleven_codewords_on_two_panels() {
    let p = pipeline();
    let b = books(&p, 11);
    let full = exhaustive_search(&p, &b, &SearchParams::default()).unwrap();
    assert_eq!(full.evaluations, 121);
    assert_eq!(full.rows.len(), 121);
    assert!(full.rows.iter().enumerate().all(|(i, r)| r.combo_index == i));
    assert_eq!(full.rows[0].slopes, vec![-5, -5]);
    assert_eq!(full.rows[120].slopes, vec![5, 5]);

    let greedy = greedy_search(&p, &b, &SearchParams::default()).unwrap();
    assert_eq!(greedy.evaluations, 22);
    // Seeds depend only on the slopes, so greedy rows reproduce exhaustive ones.
    for r in &greedy.rows {
        assert_eq!(r.objective, full.rows[r.combo_index].objective);
    }
    assert!(greedy.best_row().objective >= full.best_row().objective);
    assert_eq!(p.evaluations(), 143);
}

#[test]
fn three_codeword_searches() {
    let p = pipeline();
    let b = books(&p, 3);
    let params = SearchParams { n_seeds: 2, ..SearchParams::default() };
    let full = exhaustive_search(&p, &b, &params).unwrap();
    assert_eq!(full.rows.len(), 9);
    assert_eq!(full.evaluations, 18);
    let min = full.rows.iter().map(|r| r.objective).fold(f64::INFINITY, f64::min);
    assert_eq!(full.best_row().objective, min);
    for (k, (_, lo, hi)) in full.envelope.iter().enumerate() {
        assert!(full.rows.iter().all(|r| r.quantiles[k] >= *lo && r.quantiles[k] <= *hi));
    }
    let greedy = greedy_search(&p, &b, &SearchParams::default()).unwrap();
    assert_eq!(greedy.rows.len(), 6);

    let single = single_panel_sweep(&p, 1, &b[1], &SearchParams::default()).unwrap();
    assert_eq!(single.rows.len(), 3);
    assert_eq!(single.panels, vec![1]);
}

#[test]
fn search_is_deterministic() {
    let p = pipeline();
    let b = books(&p, 3);
    let a = exhaustive_search(&p, &b, &SearchParams::default()).unwrap();
    let c = exhaustive_search(&p, &b, &SearchParams::default()).unwrap();
    assert_eq!(a.rows, c.rows);
}

#[test]
fn budget_is_enforced() {
    let p = pipeline();
    let b = books(&p, 5);
    let err = exhaustive_search(&p, &b, &SearchParams { budget: 24, ..SearchParams::default() }).unwrap_err();
    assert!(matches!(err, Error::BudgetExceeded { required: 25, budget: 24 }));
    assert!(greedy_search(&p, &b, &SearchParams { budget: 10, ..SearchParams::default() }).is_ok());
    assert!(exhaustive_search(&p, &b[..1], &SearchParams::default()).is_err());
}
