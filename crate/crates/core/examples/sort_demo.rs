//! Exact sort, relaxed sort at several temperatures, and hard projection.
//!
//! Run with `cargo run --example sort_demo`.

use unisort::relaxation::{
    classify_matrix, relaxed_sort, sort_permutation, top_k_sum, ScoreVector, Temperature,
};

fn main() -> unisort::Result<()> {
    let s = ScoreVector::new(vec![9.0, 1.0, 5.0, 2.0])?;
    println!("scores      {:?}", s.as_slice());
    println!("sort        {:?}", sort_permutation(&s).as_slice());

    for tau in [10.0, 1.0, 0.1, 0.001] {
        let p = relaxed_sort(&s, Temperature::new(tau)?);
        let class = classify_matrix(p.entries().view())?;
        println!("\ntau = {tau}");
        for row in p.entries().rows() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:7.4}")).collect();
            println!("  {}", cells.join(" "));
        }
        println!(
            "  projection {:?}, unimodal {}, doubly stochastic {}",
            p.project_hard().as_slice(),
            class.unimodal,
            class.doubly_stochastic
        );
        // P̂·s is a soft version of the sorted vector
        let sorted = p.entries().dot(&ndarray::arr1(s.as_slice()));
        println!("  P̂·s = {:.4}", sorted);
    }

    for k in 1..=s.len() {
        println!("top-{k} sum = {}", top_k_sum(&s, k)?);
    }
    Ok(())
}
