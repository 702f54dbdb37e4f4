//! REINFORCE, reparameterized and straight-through gradients of a linear
//! objective, next to the exact value from enumeration.

use ndarray::array;
use unisort::pl::{
    matrix_objective, reinforce_gradient, reparam_gradient, straight_through_gradient, PLParams,
};
use unisort::relaxation::{permutation_to_matrix, Permutation, Temperature};
use unisort::validate::enumerated_gradient;

fn main() -> unisort::Result<()> {
    let params = PLParams::new(vec![3.0, 2.0, 1.0])?;
    let w = array![[1.0, -0.5, 0.25], [0.0, 2.0, -1.0], [0.5, 0.5, -1.5]];
    let hard_f = |z: &Permutation| (permutation_to_matrix(z).entries() * &w).sum();
    let w2 = w.clone();
    let relaxed_f = matrix_objective(move |m| Ok(m.mul_const(w2.clone())?.sum()));
    let tau = Temperature::new(1.0)?;
    let draws = 50_000;

    let exact = enumerated_gradient(&params, hard_f)?;
    println!("exact (enumeration)   {exact:.4?}");

    let r = reinforce_gradient(&params, hard_f, draws, 1)?;
    println!(
        "REINFORCE             {:.4?}  se {:.4?}",
        r.estimate,
        r.standard_errors()?
    );

    let r = reparam_gradient(&params, &relaxed_f, tau, draws, 1)?;
    println!(
        "reparameterized       {:.4?}  se {:.4?}",
        r.estimate,
        r.standard_errors()?
    );

    let r = straight_through_gradient(&params, &relaxed_f, tau, draws, 1)?;
    println!(
        "straight-through      {:.4?}  se {:.4?}",
        r.estimate,
        r.standard_errors()?
    );
    println!("\nThe relaxed estimators target the relaxed objective, so they need not match the exact gradient.");
    println!(
        "For a linear objective the straight-through backward pass equals the reparameterized one."
    );
    Ok(())
}
