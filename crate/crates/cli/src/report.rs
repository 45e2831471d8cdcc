//! Flat `key=value` reports.

use outsample::diagnostics::{
    average_kernel_distance_pythagorean, error_bounds, perturbation_estimate, spectrum_comparison,
};
use outsample::nystrom::{exactness_check, extended_kernel, SplitRun, RESIDUAL_TOL};

use outsample::Error;

use crate::data::fmt_f64;
use crate::error::CliError;

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn text(&mut self, key: &str, v: impl Into<String>) {
        self.lines.push((key.to_string(), v.into()));
    }

    pub fn num(&mut self, key: &str, v: f64) {
        self.text(key, fmt_f64(v));
    }

    pub fn count(&mut self, key: &str, v: usize) {
        self.text(key, v.to_string());
    }

    pub fn flag(&mut self, key: &str, ok: bool) {
        self.text(key, if ok { "pass" } else { "fail" });
    }

    /// `key_1 .. key_n`.
    pub fn series(&mut self, key: &str, v: &[f64]) {
        for (i, x) in v.iter().enumerate() {
            self.num(&format!("{key}_{}", i + 1), *x);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Every diagnostic of one fit / extend / retrain run.
pub fn split_report(run: &SplitRun, rep: &mut Report) -> Result<(), CliError> {
    let view = run.embedding.view();
    rep.count("n_train", view.train_indices().len());
    rep.count("n_test", view.test_indices().len());
    rep.count("d", run.model.dim());
    rep.count("m", run.full_spectra.rank());
    rep.count("s", run.residual.s());

    let bounds = error_bounds(&run.residual, view)?;
    let kh = extended_kernel(&run.embedding);
    let pyth = average_kernel_distance_pythagorean(&run.full_kernel, &kh, view)?;
    rep.num("vol_x", bounds.vol_x);
    rep.num("vol_z", bounds.vol_z);
    rep.num("avg_distance", bounds.avg_distance);
    rep.num("avg_distance_pythagorean", pyth);
    rep.num("trace_k0", bounds.trace_k0);
    rep.num("spec_radius_k0", bounds.spec_radius_k0);
    rep.count("bound_rank", bounds.bound_rank);
    rep.num("trace_bound", bounds.trace_bound);
    rep.num("spectral_bound", bounds.spectral_bound);
    rep.flag("distance_within_trace_bound", bounds.distance_within_trace_bound());
    rep.flag("trace_within_spectral_bound", bounds.trace_within_spectral_bound());

    let ex = exactness_check(&run.residual, RESIDUAL_TOL);
    rep.text("verdict", if ex.exact { "exact" } else { "inexact" });

    let gamma = match spectrum_comparison(&run.full_spectra, &run.embedding, &run.model) {
        Ok(cmp) => {
            rep.num("k0_norm", cmp.k0_norm);
            rep.num("t_norm", cmp.t_norm);
            rep.num("l_gamma_defect", cmp.l_gamma_defect);
            rep.series("lambda", &cmp.lambda);
            rep.series("gamma", &cmp.gamma);
            rep.series("sigma", &cmp.sigma);
            rep.series("gap_lambda_gamma", &cmp.lambda_gamma_gaps);
            rep.series("gap_gamma_sigma", &cmp.gamma_sigma_gaps);
            rep.flag("spectrum_checks", true);
            cmp.gamma
        }
        Err(Error::NumericalInconsistency(msg)) => {
            rep.flag("spectrum_checks", false);
            rep.text("spectrum_failure", msg.replace('\n', " "));
            run.full_spectra.eigenvalues().to_vec()
        }
        Err(e) => return Err(e.into()),
    };

    let est = perturbation_estimate(&run.full_spectra, run.residual.projector())?;
    rep.series("gamma_hat", &est.gamma_hat);
    let errs: Vec<f64> = est
        .gamma_hat
        .iter()
        .enumerate()
        .map(|(i, g)| (gamma.get(i).copied().unwrap_or(0.0) - g).abs())
        .collect();
    rep.series("first_order_error", &errs);
    let degenerate = if est.degenerate.is_empty() {
        "none".to_string()
    } else {
        est.degenerate.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
    };
    rep.text("degenerate", degenerate);
    Ok(())
}
