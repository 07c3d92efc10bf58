//! Reverse-mode differentiation over a recorded chain of tensor operations.
//!
//! A `Tape` owns every intermediate value of one forward pass. `backward`
//! walks the recording in reverse, accumulating vector-Jacobian products into
//! the nodes that were registered as differentiable. Inputs always precede
//! their outputs on the tape, so a single reverse sweep suffices.

use crate::error::{Error, Result};
use crate::tensor::ops::{
    conv2d_backward, conv2d_raw, l1_mean, l1_mean_backward, leaky_relu, leaky_relu_backward,
    upsample_nearest, upsample_nearest_backward,
};
use crate::tensor::{Shape4, Tensor4};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum OpRecord {
    Leaf,
    Conv2d {
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    },
    LeakyRelu {
        input: NodeId,
        slope: f64,
    },
    Upsample {
        input: NodeId,
        factor: usize,
    },
    L1Mean {
        a: NodeId,
        b: NodeId,
    },
    WeightedSum {
        terms: Vec<(f64, NodeId)>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor4,
    needs_grad: bool,
    grad: Option<Vec<f64>>,
    op: OpRecord,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor4, needs_grad: bool, op: OpRecord) -> NodeId {
        self.nodes.push(Node {
            value,
            needs_grad,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::Contract(format!("node {} is not on this tape", id.0)))
    }

    /// Registers a value that gradients never flow into.
    pub fn constant(&mut self, value: Tensor4) -> NodeId {
        self.push(value, false, OpRecord::Leaf)
    }

    /// Registers a differentiable leaf (a parameter or an input under study).
    pub fn param(&mut self, value: Tensor4) -> NodeId {
        self.push(value, true, OpRecord::Leaf)
    }

    /// Registers a bias vector as a (1, len, 1, 1) leaf.
    pub fn bias_param(&mut self, bias: &[f64], needs_grad: bool) -> Result<NodeId> {
        let t = Tensor4::new(Shape4::new(1, bias.len(), 1, 1), bias.to_vec())?;
        Ok(self.push(t, needs_grad, OpRecord::Leaf))
    }

    pub fn value(&self, id: NodeId) -> &Tensor4 {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated at `id`, if the node was reachable from the loss.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Clone of the node's value with its gradient (if any) attached.
    pub fn value_with_grad(&self, id: NodeId) -> Result<Tensor4> {
        let node = self.node(id)?;
        let mut t = node.value.clone();
        if let Some(g) = &node.grad {
            t.set_grad(g.clone())?;
        }
        Ok(t)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        if input == weights || input == bias || weights == bias {
            return Err(Error::Contract(
                "conv2d operands must be distinct tape nodes".into(),
            ));
        }
        let out = conv2d_raw(
            &self.node(input)?.value,
            &self.node(weights)?.value,
            self.node(bias)?.value.values(),
            stride,
            padding,
        )?;
        let needs = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(
            out,
            needs,
            OpRecord::Conv2d {
                input,
                weights,
                bias,
                stride,
                padding,
            },
        ))
    }

    pub fn leaky_relu(&mut self, input: NodeId, slope: f64) -> Result<NodeId> {
        let out = leaky_relu(&self.node(input)?.value, slope)?;
        let needs = self.needs(input);
        Ok(self.push(out, needs, OpRecord::LeakyRelu { input, slope }))
    }

    pub fn upsample_nearest(&mut self, input: NodeId, factor: usize) -> Result<NodeId> {
        let out = upsample_nearest(&self.node(input)?.value, factor)?;
        let needs = self.needs(input);
        Ok(self.push(out, needs, OpRecord::Upsample { input, factor }))
    }

    /// Records the scalar mean absolute difference of two nodes.
    pub fn l1_mean(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = l1_mean(&self.node(a)?.value, &self.node(b)?.value)?;
        let out = Tensor4::from_raw(Shape4::new(1, 1, 1, 1), vec![v]);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, needs, OpRecord::L1Mean { a, b }))
    }

    /// Records sum_i w_i * node_i over same-shaped nodes.
    pub fn weighted_sum(&mut self, terms: &[(f64, NodeId)]) -> Result<NodeId> {
        let (first_w, first_id) = *terms
            .first()
            .ok_or_else(|| Error::Contract("weighted_sum needs at least one term".into()))?;
        let shape = self.node(first_id)?.value.shape();
        let mut acc = vec![0.0; shape.len()];
        let mut needs = false;
        for &(w, id) in terms {
            let node = self.node(id)?;
            node.value.same_shape(&self.nodes[first_id.0].value, "weighted_sum")?;
            for (a, v) in acc.iter_mut().zip(node.value.values()) {
                *a += w * v;
            }
            needs |= node.needs_grad;
        }
        let _ = first_w;
        let out = Tensor4::from_raw(shape, acc);
        Ok(self.push(out, needs, OpRecord::WeightedSum { terms: terms.to_vec() }))
    }

    /// Reverse sweep from a scalar loss node. Populates gradients on every
    /// differentiable node that the loss depends on; other nodes keep no grad.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let li = loss.0;
        if li >= self.nodes.len() {
            return Err(Error::Contract(format!(
                "node {li} is not on this tape"
            )));
        }
        if self.nodes[li].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {}",
                self.nodes[li].value.shape()
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[li].needs_grad {
            grads[li] = Some(vec![1.0]);
        }

        for i in (0..=li).rev() {
            let Some(gout) = grads[i].take() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            match op {
                OpRecord::Leaf => {}
                OpRecord::Conv2d {
                    input,
                    weights,
                    bias,
                    stride,
                    padding,
                } => {
                    let need_i = self.needs(input);
                    let need_w = self.needs(weights);
                    let need_b = self.needs(bias);
                    if need_i {
                        ensure_buf(&mut grads, input.0, self.nodes[input.0].value.len());
                    }
                    if need_w {
                        ensure_buf(&mut grads, weights.0, self.nodes[weights.0].value.len());
                    }
                    if need_b {
                        ensure_buf(&mut grads, bias.0, self.nodes[bias.0].value.len());
                    }
                    // Operand distinctness was checked at record time.
                    let [gi, gw, gb] = grads
                        .get_disjoint_mut([input.0, weights.0, bias.0])
                        .expect("conv2d operands are distinct");
                    conv2d_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weights.0].value,
                        stride,
                        padding,
                        &gout,
                        gi.as_deref_mut().filter(|_| need_i),
                        gw.as_deref_mut().filter(|_| need_w),
                        gb.as_deref_mut().filter(|_| need_b),
                    );
                }
                OpRecord::LeakyRelu { input, slope } => {
                    if self.needs(input) {
                        ensure_buf(&mut grads, input.0, self.nodes[input.0].value.len());
                        leaky_relu_backward(
                            &self.nodes[input.0].value,
                            slope,
                            &gout,
                            grads[input.0].as_deref_mut().unwrap(),
                        );
                    }
                }
                OpRecord::Upsample { input, factor } => {
                    if self.needs(input) {
                        ensure_buf(&mut grads, input.0, self.nodes[input.0].value.len());
                        upsample_nearest_backward(
                            self.nodes[input.0].value.shape(),
                            factor,
                            &gout,
                            grads[input.0].as_deref_mut().unwrap(),
                        );
                    }
                }
                OpRecord::L1Mean { a, b } => {
                    let need_a = self.needs(a);
                    let need_b = self.needs(b);
                    if need_a {
                        ensure_buf(&mut grads, a.0, self.nodes[a.0].value.len());
                    }
                    if need_b {
                        ensure_buf(&mut grads, b.0, self.nodes[b.0].value.len());
                    }
                    if a == b {
                        // sign(x - x) == 0 everywhere; the zero buffer above
                        // already holds the correct gradient.
                    } else {
                        let [ga, gb] = grads
                            .get_disjoint_mut([a.0, b.0])
                            .expect("distinct l1_mean operands");
                        l1_mean_backward(
                            &self.nodes[a.0].value,
                            &self.nodes[b.0].value,
                            gout[0],
                            ga.as_deref_mut().filter(|_| need_a),
                            gb.as_deref_mut().filter(|_| need_b),
                        );
                    }
                }
                OpRecord::WeightedSum { terms } => {
                    for (w, id) in terms {
                        if !self.needs(id) {
                            continue;
                        }
                        ensure_buf(&mut grads, id.0, self.nodes[id.0].value.len());
                        let g = grads[id.0].as_deref_mut().unwrap();
                        for (gi, go) in g.iter_mut().zip(&gout) {
                            *gi += w * go;
                        }
                    }
                }
            }
            grads[i] = Some(gout);
        }

        for (node, grad) in self.nodes.iter_mut().zip(grads) {
            if node.needs_grad {
                node.grad = grad;
            }
        }
        Ok(())
    }
}

fn ensure_buf(grads: &mut [Option<Vec<f64>>], idx: usize, len: usize) {
    if grads[idx].is_none() {
        grads[idx] = Some(vec![0.0; len]);
    }
}
