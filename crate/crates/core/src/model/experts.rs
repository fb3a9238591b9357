use crate::error::Result;
use crate::numeric::{Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Parameter handles of the two-head expert system.
#[derive(Clone, Copy, Debug)]
pub struct ExpertParams {
    pub trunk_w: Var,
    pub trunk_b: Var,
    pub causal_w: Var,
    pub causal_b: Var,
    pub stat_w: Var,
    pub stat_b: Var,
    pub gate_w: Var,
    pub gate_b: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct ExpertOut {
    pub trunk: Var,
    pub causal: Var,
    pub statistical: Var,
    /// `[1, 1]` mixing weight of the causal head.
    pub gate: Var,
    pub mixed: Var,
}

fn affine<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

/// Shared trunk feeding a causal and a statistical head, mixed as
/// `gate * causal + (1 - gate) * statistical`.
pub fn expert_forward<T: Scalar>(
    tape: &mut Tape<T>,
    p: &ExpertParams,
    input: Var,
    gate_override: Option<T>,
) -> Result<ExpertOut> {
    let pre = affine(tape, input, p.trunk_w, p.trunk_b)?;
    let trunk = tape.relu(pre);
    let causal = affine(tape, trunk, p.causal_w, p.causal_b)?;
    let statistical = affine(tape, trunk, p.stat_w, p.stat_b)?;
    let gate = match gate_override {
        Some(g) => tape.constant(Tensor::matrix(1, 1, vec![g])?),
        None => {
            let g = affine(tape, trunk, p.gate_w, p.gate_b)?;
            tape.sigmoid(g)
        }
    };
    let diff = tape.sub(causal, statistical)?;
    let scaled = tape.mul_scalar(diff, gate)?;
    let mixed = tape.add(statistical, scaled)?;
    Ok(ExpertOut { trunk, causal, statistical, gate, mixed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(tape: &mut Tape<f64>) -> (ExpertParams, Var) {
        let m = |tape: &mut Tape<f64>, r, c, s: f64| {
            tape.var(Tensor::new(vec![r, c], (0..r * c).map(|i| ((i as f64 + s) * 0.7).sin()).collect()).unwrap())
        };
        let p = ExpertParams {
            trunk_w: m(tape, 3, 4, 0.0),
            trunk_b: m(tape, 1, 4, 1.0),
            causal_w: m(tape, 4, 2, 2.0),
            causal_b: m(tape, 1, 2, 3.0),
            stat_w: m(tape, 4, 2, 4.0),
            stat_b: m(tape, 1, 2, 5.0),
            gate_w: m(tape, 4, 1, 6.0),
            gate_b: m(tape, 1, 1, 7.0),
        };
        let x = m(tape, 1, 3, 8.0);
        (p, x)
    }

    #[test]
    fn forced_gates() {
        let mut tape = Tape::new();
        let (p, x) = setup(&mut tape);
        let one = expert_forward(&mut tape, &p, x, Some(1.0)).unwrap();
        for (m, c) in tape.value(one.mixed).data().iter().zip(tape.value(one.causal).data()) {
            assert!((m - c).abs() < 1e-12);
        }
        let half = expert_forward(&mut tape, &p, x, Some(0.5)).unwrap();
        let c = tape.value(half.causal).data().to_vec();
        let s = tape.value(half.statistical).data().to_vec();
        for ((m, c), s) in tape.value(half.mixed).data().iter().zip(c).zip(s) {
            assert!((m - (c + s) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn learned_gate_is_convex() {
        let mut tape = Tape::new();
        let (p, x) = setup(&mut tape);
        let out = expert_forward(&mut tape, &p, x, None).unwrap();
        let g = tape.value(out.gate).item().unwrap();
        assert!((0.0..=1.0).contains(&g));
        let c = tape.value(out.causal).data();
        let s = tape.value(out.statistical).data();
        for ((m, c), s) in tape.value(out.mixed).data().iter().zip(c).zip(s) {
            assert!(*m >= c.min(*s) - 1e-12 && *m <= c.max(*s) + 1e-12);
        }
    }
}
