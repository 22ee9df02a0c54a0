use renewmed::engine::{load_checkpoint, save_checkpoint, Analysis, MediationStream, OutcomeModel, StreamConfig};
use renewmed::sim::{generate_case, CaseSpec};

fn numbers(a: &Analysis) -> Vec<f64> {
    let s = &a.summary;
    let mut v = vec![a.lambda, s.gamma_hat, s.gamma_se, a.effects.nde, a.effects.nie, a.effects.te];
    for set in [&s.alpha_hat, &s.alpha_se, &s.beta_hat, &s.beta_se] {
        v.extend(set.iter().copied());
    }
    for r in &a.tests {
        v.extend([
            r.product_hat, r.sigma_product, r.p_sobel, r.p_asobel, r.p_js, r.p_ajs, r.ci_sobel.lower, r.ci_sobel.upper,
            r.ci_asobel.lower, r.ci_asobel.upper,
        ]);
    }
    v
}

#[test]
fn interleaved_save_load_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    for (case, model) in [(1, OutcomeModel::Linear), (3, OutcomeModel::Logistic)] {
        let spec = CaseSpec::case(case).unwrap().with_n_total(3000);
        let batches = generate_case(&spec, 10, 5, 0).unwrap();
        let config = StreamConfig::new(model, spec.dims());

        let mut memory = MediationStream::new(config.clone()).unwrap();
        let path = dir.path().join(format!("case{case}.ckpt"));
        save_checkpoint(&MediationStream::new(config).unwrap(), &path).unwrap();
        for b in &batches {
            memory.update(b).unwrap();
            let mut resumed = load_checkpoint(&path).unwrap();
            resumed.update(b).unwrap();
            save_checkpoint(&resumed, &path).unwrap();
        }
        let resumed = load_checkpoint(&path).unwrap();
        assert_eq!(resumed, memory);
        assert_eq!(numbers(&resumed.analyze().unwrap()), numbers(&memory.analyze().unwrap()));

        let first = std::fs::read(&path).unwrap();
        save_checkpoint(&resumed, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}

#[test]
fn report_does_not_mutate_state() {
    let spec = CaseSpec::case(2).unwrap().with_n_total(500);
    let mut s = MediationStream::new(StreamConfig::new(OutcomeModel::Linear, spec.dims())).unwrap();
    for b in generate_case(&spec, 5, 1, 0).unwrap() {
        s.update(&b).unwrap();
    }
    let before = s.clone();
    let a = s.analyze().unwrap();
    assert_eq!(s, before);
    assert_eq!(numbers(&s.analyze().unwrap()), numbers(&a));
}
