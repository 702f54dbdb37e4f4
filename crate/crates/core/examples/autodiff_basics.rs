//! Reverse-mode gradients through the relaxed sort, checked against
//! central finite differences.

use unisort::autodiff::{finite_diff_gradient, relative_error, relaxed_sort_var, Tape};
use unisort::losses::{cross_entropy_rows, cross_entropy_rows_var};
use unisort::relaxation::{relaxed_sort, Permutation, ScoreVector, Temperature};

fn main() -> unisort::Result<()> {
    let s = vec![0.3, -1.2, 2.0, 0.7];
    let tau = Temperature::new(0.5)?;
    let truth = Permutation::new(vec![3, 4, 1, 2])?.to_matrix();

    // s·s has gradient 2s
    let tape = Tape::new();
    let x = tape.column(&s);
    let g = x.square().sum().backward()?;
    println!("d(s·s)/ds = {:?}", g.wrt(x).into_iter().collect::<Vec<_>>());

    // total mass of the relaxed matrix is constant, so its gradient vanishes
    let tape = Tape::new();
    let x = tape.column(&s);
    let g = relaxed_sort_var(x, tau)?.sum().backward()?;
    println!("d(Σ P̂)/ds = {:?}", g.wrt(x).into_iter().collect::<Vec<_>>());

    let tape = Tape::new();
    let x = tape.column(&s);
    let loss = cross_entropy_rows_var(&truth, relaxed_sort_var(x, tau)?)?;
    let ad: Vec<f64> = loss.backward()?.wrt(x).into_iter().collect();
    let fd = finite_diff_gradient(
        |v| {
            let p = relaxed_sort(&ScoreVector::new(v.to_vec()).unwrap(), tau);
            cross_entropy_rows(&truth, p.entries().view()).unwrap()
        },
        &s,
        1e-5,
    );
    println!("cross-entropy {:.6}", loss.scalar_value());
    println!("  AD {ad:.6?}");
    println!("  FD {fd:.6?}");
    println!("  relative error {:.2e}", relative_error(&ad, &fd, 1e-8));
    println!("tape holds {} nodes", tape.len());
    Ok(())
}
