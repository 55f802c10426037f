//! Abduction, intervention and prediction on a small confounded model.
//!
//! Z confounds X and Y. We observe a patient who was treated (X=1) and did not
//! recover (Y=0) and ask what would have happened without treatment.

use cfrl::scm::text::parse_scm;
use cfrl::scm::{Intervention, Observation};

fn main() -> cfrl::Result<()> {
    let file = parse_scm(include_str!("../fixtures/confounded.scm"))?;
    let scm = &file.scm;

    let observed = Observation::new().with("X", "1").with("Y", "0");
    let posterior = scm.infer_noise_posterior(&observed)?;
    println!("noise assignments consistent with X=1, Y=0: {}", posterior.len());
    println!("posterior over U_Z: {:?}", posterior.marginal(scm, &["U_Z"])?.iter_labeled().collect::<Vec<_>>());

    let untreated = Intervention::atomic(scm, "X", "0")?;
    let treated = Intervention::atomic(scm, "X", "1")?;
    let interventional = scm.interventional_marginal(&untreated, &["Y"])?;
    let counterfactual = scm.counterfactual_query(&observed, &untreated, &["Y"])?;
    println!("P(Y=1 | do(X=0))               = {:.4}", interventional.prob(&["1"]));
    println!("P(Y=1 | do(X=0); X=1, Y=0)     = {:.4}", counterfactual.prob(&["1"]));
    println!("P(Y=1 | do(X=1))               = {:.4}", scm.interventional_marginal(&treated, &["Y"])?.prob(&["1"]));

    // keep the inferred confounder, redraw the outcome noise from its prior
    let mixed = scm.mixed_query(&observed, &["U_Z"], &untreated, &["Y"])?;
    println!("same, U_Z abducted, U_Y fresh  = {:.4}", mixed.prob(&["1"]));
    Ok(())
}
