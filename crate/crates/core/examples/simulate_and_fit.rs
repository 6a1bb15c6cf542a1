//! Simulate one half-sib dataset and fit it with every estimator.

use halfsib_reml::estimators::{Component, Method, StepwiseOptions};
use halfsib_reml::model::{simulate, CovarianceComponents, DesignSpec};
use halfsib_reml::stats::mean_squares;
use nalgebra::{DMatrix, DVector};

fn main() -> halfsib_reml::Result<()> {
    let p = 4;
    let design = DesignSpec::standard(p)?;
    let sigma_a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.0, 0.0]));
    let sigma_b = DMatrix::identity(p, p) * 0.5;
    let comps = CovarianceComponents::new(sigma_a, sigma_b, DMatrix::identity(p, p))?;
    let data = simulate(&design, &comps, &DVector::zeros(p), 11)?;
    let ms = mean_squares(&data);

    for method in Method::ALL {
        let est = method.fit(&ms, &design, &StepwiseOptions::default())?;
        println!("{:>9}  criterion {:>12.4}  iterations {}", method.tag(), est.criterion, est.iterations);
        for c in Component::ALL {
            let eigs: Vec<String> = est.spectrum(c).iter().map(|v| format!("{v:8.4}")).collect();
            println!("           Σ_{} {}", c.tag(), eigs.join(" "));
        }
    }
    Ok(())
}
