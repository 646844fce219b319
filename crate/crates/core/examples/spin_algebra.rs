//! Collective spin operators in the Dicke basis and the checks they satisfy.

use btc_sense::build_spin_operators;
use btc_sense::linalg::{self, commutator, frobenius_norm, I};

pub fn run_example() -> btc_sense::Result<()> {
    for n in [1, 2, 7, 32] {
        let ops = build_spin_operators(n)?;
        let s = ops.spin();
        // [S^x, S^y] = i S^z
        let lhs = commutator(ops.sx.as_ref(), ops.sy.as_ref());
        let rhs = linalg::scale(ops.sz.as_ref(), I);
        let comm_err = frobenius_norm((&lhs - &rhs).as_ref());
        // S^2 = S(S+1)
        let s2 = &ops.sx * &ops.sx + &ops.sy * &ops.sy + &ops.sz * &ops.sz;
        let casimir = linalg::scale(ops.identity().as_ref(), (s * (s + 1.0)).into());
        let cas_err = frobenius_norm((&s2 - &casimir).as_ref());
        println!(
            "N = {n:>2}: dim {:>2}, top ladder coefficient {:.4}, |[Sx,Sy] - iSz| = {comm_err:.1e}, |S^2 - S(S+1)| = {cas_err:.1e}",
            ops.dim, ops.ladder[0]
        );
    }
    Ok(())
}

fn main() -> btc_sense::Result<()> {
    run_example()
}
