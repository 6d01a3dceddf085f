use shapcurve::oracle::*;
use shapcurve::smoothing::*;

fn main() {
    // True MISE of the 2-D full-model fit under dgp3 rho=0 at n=250,
    // by Monte Carlo over 40 samples, error averaged over the sample points.
    let spec = DgpSpec::dgp3(0.0).unwrap();
    let m_true = |x: &[f64]| spec.regression(x);
    for h in [0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8] {
        let mut total = 0.0;
        let mut count = 0usize;
        for r in 0..40 {
            let data = sample(&spec, 250, 333 + r).unwrap();
            let fit = local_linear_fit(&data, &[h, h]).unwrap();
            // fresh evaluation points from the covariate law
            let eval = sample(&spec, 200, 7777 + r).unwrap();
            for i in 0..eval.n() {
                let x = eval.row(i);
                if x.iter().any(|v| v.abs() > 3.0) { continue; }
                if let Ok(v) = fit.eval(x) {
                    total += (v - m_true(x)).powi(2);
                    count += 1;
                }
            }
        }
        println!("h={h}: regression MSE (interior, f-weighted) = {:.4}", total / count as f64);
    }
    // what does the CV pick on these samples?
    let mut picks = Vec::new();
    for r in 0..10 {
        let data = sample(&spec, 250, 333 + r).unwrap();
        let grids = default_candidate_grids(&data, 15);
        picks.push(loo_cv_bandwidth(&data, &grids).unwrap());
    }
    println!("CV picks: {picks:?}");
}
