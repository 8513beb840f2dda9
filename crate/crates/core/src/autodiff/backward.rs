use super::tape::{Op, Tape, Value};
use super::tensor::Tensor;
use super::AutodiffError;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Result of [`grad`]: one gradient per requested input.
#[derive(Debug)]
pub struct Gradients {
    pub values: Vec<Value>,
    /// `true` for inputs the output does not depend on; their gradient is zero.
    pub disconnected: Vec<bool>,
}

impl Gradients {
    pub fn into_values(self) -> Vec<Value> {
        self.values
    }
}

/// Restores the tape's recording flag when dropped.
struct RecordingGuard<'a> {
    tape: &'a Tape,
    prev: bool,
}

impl Drop for RecordingGuard<'_> {
    fn drop(&mut self) {
        self.tape.set_recording(self.prev);
    }
}

/// Gradients of a scalar `output` with respect to each of `inputs`.
///
/// The backward pass is itself evaluated with tape operations. With
/// `create_graph` those operations are recorded, so the returned gradients
/// can be differentiated again; otherwise they are plain leaves.
pub fn grad(output: &Value, inputs: &[&Value], create_graph: bool) -> Result<Gradients> {
    if output.numel() != 1 {
        return Err(AutodiffError::NotScalar {
            shape: output.shape().to_vec(),
        });
    }
    let tape = output.tape().clone();
    for x in inputs {
        if !x.tape().same(&tape) {
            return Err(AutodiffError::ForeignTape);
        }
    }
    let out_id = output.id;

    // Nodes that lie on a path from some input to the output.
    let (reach, ops, parents) = {
        let inner = tape.inner.borrow();
        let mut reach = vec![false; out_id + 1];
        for x in inputs {
            if x.id <= out_id {
                reach[x.id] = true;
            }
        }
        let lo = inputs.iter().map(|x| x.id).min().unwrap_or(out_id + 1);
        for id in lo..=out_id {
            if !reach[id] {
                reach[id] = inner.nodes[id].parents.iter().any(|&p| reach[p]);
            }
        }
        let ops: Vec<Op> = inner.nodes[..=out_id]
            .iter()
            .map(|n| n.op.clone())
            .collect();
        let parents: Vec<Vec<usize>> = inner.nodes[..=out_id]
            .iter()
            .map(|n| n.parents.clone())
            .collect();
        (reach, ops, parents)
    };

    let prev = tape.set_recording(create_graph);
    let _guard = RecordingGuard { tape: &tape, prev };

    let mut grads: Vec<Option<Value>> = vec![None; out_id + 1];
    if reach[out_id] {
        grads[out_id] = Some(tape.leaf(Tensor::full(output.shape(), 1.0)));
    }
    for id in (0..=out_id).rev() {
        if !reach[id] || parents[id].is_empty() {
            continue;
        }
        let Some(g) = grads[id].take() else { continue };
        let node = tape.value_of(id);
        let pvals: Vec<Value> = parents[id].iter().map(|&p| tape.value_of(p)).collect();
        let pgrads = backward_rule(&ops[id], &node, &pvals, &g)?;
        for (pid, pg) in parents[id].iter().zip(pgrads) {
            if !reach[*pid] {
                continue;
            }
            let Some(pg) = pg else { continue };
            grads[*pid] = Some(match grads[*pid].take() {
                Some(acc) => acc.add(&pg)?,
                None => pg,
            });
        }
        // Inputs that are also intermediate nodes keep their gradient.
        if inputs.iter().any(|x| x.id == id) {
            grads[id] = Some(g);
        }
    }

    let mut values = Vec::with_capacity(inputs.len());
    let mut disconnected = Vec::with_capacity(inputs.len());
    for x in inputs {
        match grads.get(x.id).and_then(|g| g.clone()) {
            Some(g) => {
                values.push(g);
                disconnected.push(false);
            }
            None => {
                values.push(tape.leaf(Tensor::zeros(x.shape())));
                disconnected.push(true);
            }
        }
    }
    Ok(Gradients {
        values,
        disconnected,
    })
}

/// Sums a broadcast gradient back down to `target`'s shape.
fn reduce_to(g: Value, target: &Value) -> Result<Value> {
    if g.shape() == target.shape() {
        Ok(g)
    } else {
        g.sum()?.reshape(target.shape())
    }
}

fn mask(like: &Value, f: impl Fn(f64) -> f64) -> Value {
    like.tape().leaf(like.tensor().map(f))
}

fn backward_rule(op: &Op, out: &Value, p: &[Value], g: &Value) -> Result<Vec<Option<Value>>> {
    let one = |v: Value| Ok(vec![Some(v)]);
    match op {
        Op::Leaf => Ok(Vec::new()),
        Op::Add => Ok(vec![
            Some(reduce_to(g.clone(), &p[0])?),
            Some(reduce_to(g.clone(), &p[1])?),
        ]),
        Op::Sub => Ok(vec![
            Some(reduce_to(g.clone(), &p[0])?),
            Some(reduce_to(g.neg()?, &p[1])?),
        ]),
        Op::Mul => Ok(vec![
            Some(reduce_to(g.mul(&p[1])?, &p[0])?),
            Some(reduce_to(g.mul(&p[0])?, &p[1])?),
        ]),
        Op::Div => {
            let ga = g.div(&p[1])?;
            let gb = g.mul(out)?.div(&p[1])?.neg()?;
            Ok(vec![
                Some(reduce_to(ga, &p[0])?),
                Some(reduce_to(gb, &p[1])?),
            ])
        }
        Op::Neg => one(g.neg()?),
        Op::Scale(c) => one(g.scale(*c)?),
        Op::Matmul => Ok(vec![
            Some(g.matmul(&p[1].transpose()?)?),
            Some(p[0].transpose()?.matmul(g)?),
        ]),
        Op::Transpose => one(g.transpose()?),
        Op::AddBias => Ok(vec![
            Some(g.clone()),
            Some(g.sum_rows()?.reshape(p[1].shape())?),
        ]),
        Op::SumRows => {
            let n = p[0].shape()[0];
            one(g.broadcast_rows(n)?)
        }
        Op::BroadcastRows => one(g.sum_rows()?),
        Op::SumCols => {
            let m = p[0].shape()[1];
            one(g.broadcast_cols(m)?)
        }
        Op::BroadcastCols => one(g.sum_cols()?),
        Op::Expand => one(g.sum()?.reshape(p[0].shape())?),
        // Subgradient at 0 is 0.
        Op::Relu => one(g.mul(&mask(&p[0], |x| if x > 0.0 { 1.0 } else { 0.0 }))?),
        Op::LeakyRelu(slope) => {
            let s = *slope;
            one(g.mul(&mask(&p[0], |x| if x > 0.0 { 1.0 } else { s }))?)
        }
        Op::Tanh => {
            let d = out.tape().scalar(1.0).sub(&out.mul(out)?)?;
            one(g.mul(&d)?)
        }
        Op::Sigmoid => {
            let d = out.mul(&out.tape().scalar(1.0).sub(out)?)?;
            one(g.mul(&d)?)
        }
        Op::Abs => one(g.mul(&mask(&p[0], |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }))?),
        Op::Log => one(g.div(&p[0])?),
        Op::Clamp(lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            one(g.mul(&mask(&p[0], |x| if x >= lo && x <= hi { 1.0 } else { 0.0 }))?)
        }
        Op::Sum => one(g.expand(p[0].shape())?),
        Op::Mean => {
            let n = p[0].numel() as f64;
            one(g.scale(1.0 / n)?.expand(p[0].shape())?)
        }
        Op::L2NormRows => {
            let m = p[0].shape()[1];
            one(p[0].mul(&g.div(out)?.broadcast_cols(m)?)?)
        }
        Op::Concat(widths) => {
            let mut out = Vec::with_capacity(widths.len());
            let mut start = 0;
            for &w in widths {
                out.push(Some(g.slice_cols(start, start + w)?));
                start += w;
            }
            Ok(out)
        }
        Op::SliceCols(start) => {
            let total = p[0].shape()[1];
            one(g.pad_cols(*start, total)?)
        }
        Op::PadCols(start) => {
            let w = p[0].shape()[1];
            one(g.slice_cols(*start, start + w)?)
        }
        Op::Reshape => one(g.reshape(p[0].shape())?),
    }
}

/// Compares reverse-mode gradients of `f` at `x` against central differences.
///
/// Returns the largest per-coordinate error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`; the floor keeps
/// round-off in near-zero coordinates from reading as a large relative error.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Value) -> Result<Value>,
{
    let tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let y = f(&xv)?;
    let analytic = grad(&y, &[&xv], false)?.values.remove(0);

    let eval = |t: Tensor| -> Result<f64> {
        let tape = Tape::new();
        let v = tape.leaf(t);
        f(&v)?.item()
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    Ok(worst)
}
