use spmv_tune::autotuner::{tune, TuneConfig, TunePath};
use spmv_tune::features::{extract_all, FeatureConfig};
use spmv_tune::formats::{CsrMatrix, Format};
use spmv_tune::io::{generate_synthetic, mixed_corpus};
use spmv_tune::kernels::spmv_csr;
use spmv_tune::mining::{label_corpus, tailor_rules, train_tree, tree_to_rules, LabelConfig, RuleSet, TreeParams};
use spmv_tune::timing::{random_vector, TimingConfig};

#[test]
fn label_train_tailor_tune() {
    let specs = mixed_corpus(24, 200, 1500, 5);
    let matrices: Vec<(String, CsrMatrix<f64>)> = specs
        .iter()
        .map(|s| (s.to_string(), generate_synthetic(s).unwrap()))
        .collect();
    let config = LabelConfig {
        timing: TimingConfig { warmup: 1, repeats: 3 },
        ..LabelConfig::default()
    };
    let (dataset, ids) = label_corpus(matrices.iter().map(|(id, a)| (id.as_str(), a)), &config);
    assert_eq!(ids.len(), matrices.len());

    let tree = train_tree(
        &dataset,
        &TreeParams {
            min_leaf: 2,
            ..TreeParams::default()
        },
    )
    .unwrap();
    let rules = tree_to_rules(&tree, &dataset);
    assert!(!rules.rules.is_empty());
    assert!(rules.rules.iter().all(|r| r.is_staged()));
    let report = tailor_rules(&rules, &dataset, 0.01);
    assert!(report.errors[report.kept] <= report.full_error + 0.01 + 1e-12);

    let text = report.ruleset.to_text();
    let parsed = RuleSet::parse(&text).unwrap();
    assert_eq!(parsed, report.ruleset);

    for (_, a) in matrices.iter().take(8) {
        let tuned = tune(a, &parsed, &TuneConfig::default()).unwrap();
        let x: Vec<f64> = random_vector(a.ncols(), 3);
        let want = spmv_csr(a, &x).unwrap();
        let got = tuned.spmv(&x).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-13 * w.abs().max(1.0));
        }
        if tuned.report.path == TunePath::Measured {
            let best = tuned.report.timings.iter().map(|t| t.time).min().unwrap();
            assert_eq!(tuned.report.timing_of(tuned.format()), Some(best));
        }
    }
}

#[test]
fn staged_extraction_stops_at_dia() {
    let a: CsrMatrix<f64> = generate_synthetic(&spmv_tune::io::SyntheticSpec::banded(500, &[-1, 0, 1], 1.0)).unwrap();
    let tuned = tune(&a, &RuleSet::observation_rules(), &TuneConfig::default()).unwrap();
    assert_eq!(tuned.format(), Format::Dia);
    let s = tuned.report.stages;
    assert_eq!((s.basic, s.dia, s.ell, s.powerlaw), (1, 1, 0, 0));
    let fv = extract_all(&a, FeatureConfig::default());
    assert_eq!(fv.ndiags, Some(3));
}
