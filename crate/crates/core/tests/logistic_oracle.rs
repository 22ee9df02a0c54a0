mod common;

use common::{logistic_mle, rel_norm, to_dmatrix};
use renewmed::engine::{MediationStream, OutcomeModel, StreamConfig};
use renewmed::sim::{generate_case, CaseSpec};
use renewmed::BatchData;

fn stream(spec: &CaseSpec, batches: &[BatchData]) -> MediationStream {
    let mut s = MediationStream::new(StreamConfig::new(OutcomeModel::Logistic, spec.dims())).unwrap();
    for b in batches {
        s.update(b).unwrap();
    }
    s
}

#[test]
fn single_batch_is_the_maximum_likelihood_fit() {
    for case in [3, 4, 7, 8] {
        let spec = CaseSpec::case(case).unwrap().with_n_total(3000);
        let batches = generate_case(&spec, 1, 42, 0).unwrap();
        let s = stream(&spec, &batches);
        let fit = logistic_mle(&to_dmatrix(&batches[0].w), &batches[0].y);
        assert!(rel_norm(s.gamma_tilde(), &fit.coef) <= 1e-8, "case {case}");
        let summary = s.summary().unwrap();
        let dims = spec.dims();
        for j in 0..dims.p {
            let want = fit.se[dims.mediator_slot(j)];
            assert!(((summary.beta_se[j] - want) / want).abs() <= 1e-8, "case {case}, j {j}");
        }
    }
}

#[test]
fn streamed_fit_stays_close_to_full_data() {
    let spec = CaseSpec::case(3).unwrap().with_n_total(6000);
    let full = generate_case(&spec, 1, 9, 0).unwrap();
    let fit = logistic_mle(&to_dmatrix(&full[0].w), &full[0].y);
    for k in [5, 20, 60] {
        let s = stream(&spec, &generate_case(&spec, k, 9, 0).unwrap());
        let gap = s
            .gamma_tilde()
            .iter()
            .zip(&fit.coef)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 0.03, "k {k}: gap {gap}");
    }
}

#[test]
fn separated_data_is_reported() {
    let spec = CaseSpec::case(3).unwrap().with_n_total(200);
    let mut batches = generate_case(&spec, 1, 1, 0).unwrap();
    let x = batches[0].w.column(1);
    for (y, x) in batches[0].y.iter_mut().zip(x) {
        *y = (x > 0.0) as u8 as f64;
    }
    let mut s = MediationStream::new(StreamConfig::new(OutcomeModel::Logistic, spec.dims())).unwrap();
    let err = s.update(&batches[0]).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    assert_eq!(s.batch_count(), 0);
}
