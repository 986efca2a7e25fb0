// temporary: per-point decomposition of worst case-2 held-out log scores
use copula_bvs::copula::RegressionData;
use copula_bvs::margins::{fit_margin, MarginKind};
use copula_bvs::predict::{log_predictive_density_at, predictive_mixture};
use copula_bvs::priors::GPrior;
use copula_bvs::sampler::{run_chain, SamplerConfig};
use copula_bvs::simstudy::{generate_beta, generate_design, generate_response, SimCase};
use nalgebra::{DMatrix, DVector};

fn main() {
    let x = generate_design(200, 20, 602);
    let (beta, _) = generate_beta(20, 602);
    let y = generate_response(SimCase::LogNormal, &x, &beta, 8.0, 602).unwrap();
    let yv: Vec<f64> = y.iter().cloned().collect();

    // fold 0: train on rows 20.., test on 0..20
    let train_rows: Vec<usize> = (20..200).collect();
    let train_y: Vec<f64> = train_rows.iter().map(|&r| yv[r]).collect();
    let train_x = DMatrix::from_fn(180, 20, |i, j| x[(train_rows[i], j)]);
    let margin = fit_margin(&train_y, MarginKind::Kde).unwrap();
    let data = RegressionData::new(train_y.clone(), train_x, &margin).unwrap();
    let prior = GPrior::hyper_g(4.0).unwrap();
    let trace = run_chain(&data, &prior, &SamplerConfig::new(1500, 400, 9)).unwrap();
    println!("median g {:.0}, mean q {:.1}",
        trace.posterior_median_g().unwrap(),
        trace.post_burnin().iter().map(|r| r.gamma.iter().filter(|&&b| b).count()).sum::<usize>() as f64 / 1100.0);

    let tmin = train_y.iter().cloned().fold(f64::INFINITY, f64::min);
    let tmax = train_y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("train y range [{:.4}, {:.2}]", tmin, tmax);
    let mut scores = Vec::new();
    for r in 0..20usize {
        let x_new = DVector::from_iterator(20, (0..20).map(|j| x[(r, j)] - data.offsets[j]));
        let mix = predictive_mixture(&trace, &data, &x_new).unwrap();
        let lp = log_predictive_density_at(&mix, &margin, yv[r]);
        let z = margin.pit(yv[r]);
        let smin = mix.s.iter().cloned().fold(f64::INFINITY, f64::min);
        scores.push((lp, yv[r], z, smin));
    }
    scores.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (lp, yval, z, smin) in scores.iter().take(5) {
        println!("lp {lp:10.2}  y {yval:9.3}  z {z:6.2}  s_min {smin:.4}");
    }
    let mean: f64 = scores.iter().map(|s| s.0).sum::<f64>() / 20.0;
    println!("fold mean {mean:.3}");
}
