//! Reverse-mode automatic differentiation over a Wengert list.
//!
//! Scalar operations are recorded as nodes holding their parents and the
//! local partial derivatives evaluated during the forward pass. A whole
//! policy-network evaluation is recorded as a single fused node that keeps
//! its hidden activations in an arena; its backward pass accumulates
//! parameter gradients directly instead of expanding every multiply-add
//! into scalar nodes.
//!
//! [`Real`] abstracts over `f64` and [`Var`], so model code (pension rules,
//! fees, wealth dynamics, utilities) is written once and either evaluated
//! plainly or differentiated.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::policy_net::MlpParams;

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf,
    Unary { a: u32, da: f64 },
    Binary { a: u32, da: f64, b: u32, db: f64 },
    Net { inputs: [u32; 4], offset: u32 },
}

/// Recording of a computation. Parents always precede children.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    arena: RefCell<Vec<f64>>,
    widths: RefCell<Option<[usize; 3]>>,
}

/// A scalar living on a [`Tape`]. Constants carry no node.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.idx == CONST {
            write!(f, "Var(const {})", self.value)
        } else {
            write!(f, "Var(#{} = {})", self.idx, self.value)
        }
    }
}

/// Adjoints of every node plus the accumulated network-parameter gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
    net: Option<MlpParams>,
}

impl Gradients {
    pub fn wrt(&self, var: Var<'_>) -> f64 {
        if var.idx == CONST {
            0.0
        } else {
            self.adjoints[var.idx as usize]
        }
    }

    pub fn net(&self) -> Option<&MlpParams> {
        self.net.as_ref()
    }

    pub fn into_net(self) -> Option<MlpParams> {
        self.net
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(nodes)),
            arena: RefCell::new(Vec::new()),
            widths: RefCell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node::Leaf);
        Var {
            tape: self,
            idx,
            value,
        }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            idx: CONST,
            value,
        }
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < CONST as usize, "tape exhausted");
        nodes.push(node);
        idx as u32
    }

    fn unary(&self, a: Var<'_>, value: f64, da: f64) -> Var<'_> {
        let idx = if a.idx == CONST {
            CONST
        } else {
            self.push(Node::Unary { a: a.idx, da })
        };
        Var {
            tape: self,
            idx,
            value,
        }
    }

    fn binary(&self, a: Var<'_>, da: f64, b: Var<'_>, db: f64, value: f64) -> Var<'_> {
        let idx = match (a.idx == CONST, b.idx == CONST) {
            (true, true) => CONST,
            (false, true) => self.push(Node::Unary { a: a.idx, da }),
            (true, false) => self.push(Node::Unary { a: b.idx, da: db }),
            (false, false) => self.push(Node::Binary {
                a: a.idx,
                da,
                b: b.idx,
                db,
            }),
        };
        Var {
            tape: self,
            idx,
            value,
        }
    }

    fn record_net<'t>(&'t self, net: &MlpParams, inputs: [Var<'t>; 4]) -> Var<'t> {
        {
            let mut widths = self.widths.borrow_mut();
            match *widths {
                None => *widths = Some(net.widths()),
                Some(w) => assert_eq!(w, net.widths(), "one network per tape"),
            }
        }
        let x = inputs.map(|v| v.value);
        let mut arena = self.arena.borrow_mut();
        let offset = arena.len();
        arena.extend_from_slice(&x);
        arena.resize(offset + 4 + net.hidden_len(), 0.0);
        let z = net.forward_into(x, &mut arena[offset + 4..]);
        drop(arena);
        let idx = self.push(Node::Net {
            inputs: inputs.map(|v| v.idx),
            offset: offset as u32,
        });
        Var {
            tape: self,
            idx,
            value: z,
        }
    }

    /// Reverse sweep from `output`, seeded with `seed`.
    ///
    /// `net` must be the parameters every recorded network node was evaluated
    /// with; it may be `None` only when the tape holds no network node.
    pub fn gradient(&self, output: Var<'_>, seed: f64, net: Option<&MlpParams>) -> Result<Gradients> {
        if !std::ptr::eq(output.tape, self) {
            return Err(Error::Structural("output variable belongs to another tape".into()));
        }
        if output.idx == CONST {
            return self.sweep(None, seed, net);
        }
        self.sweep(Some(output.idx as usize), seed, net)
    }

    /// Reverse sweep from the node at position `index`.
    pub fn gradient_at(&self, index: usize, seed: f64, net: Option<&MlpParams>) -> Result<Gradients> {
        if index >= self.len() {
            return Err(Error::Structural(format!(
                "node {index} does not exist on a tape of {} nodes",
                self.len()
            )));
        }
        self.sweep(Some(index), seed, net)
    }

    fn sweep(&self, output: Option<usize>, seed: f64, net: Option<&MlpParams>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let arena = self.arena.borrow();
        let recorded = *self.widths.borrow();
        let mut net_grad = match (recorded, net) {
            (None, None) => None,
            (None, Some(p)) => Some(MlpParams::zeros(p.widths())),
            (Some(_), None) => {
                return Err(Error::Structural(
                    "tape contains network nodes but no parameters were supplied".into(),
                ))
            }
            (Some(w), Some(p)) if w != p.widths() => {
                return Err(Error::Structural(format!(
                    "tape recorded widths {w:?}, parameters have {:?}",
                    p.widths()
                )))
            }
            (Some(_), Some(p)) => Some(MlpParams::zeros(p.widths())),
        };
        let mut adj = vec![0.0; nodes.len()];
        let Some(output) = output else {
            return Ok(Gradients {
                adjoints: adj,
                net: net_grad,
            });
        };
        adj[output] = seed;
        let mut scratch = Vec::new();
        for i in (0..=output).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match nodes[i] {
                Node::Leaf => {}
                Node::Unary { a, da } => adj[a as usize] += g * da,
                Node::Binary { a, da, b, db } => {
                    adj[a as usize] += g * da;
                    adj[b as usize] += g * db;
                }
                Node::Net { inputs, offset } => {
                    let params = net.expect("checked above");
                    let grad = net_grad.as_mut().expect("checked above");
                    let off = offset as usize;
                    let x = [arena[off], arena[off + 1], arena[off + 2], arena[off + 3]];
                    let acts = &arena[off + 4..off + 4 + params.hidden_len()];
                    let dx = params.backward_into(x, acts, g, grad, &mut scratch);
                    for (k, &p) in inputs.iter().enumerate() {
                        if p != CONST {
                            adj[p as usize] += dx[k];
                        }
                    }
                }
            }
        }
        Ok(Gradients {
            adjoints: adj,
            net: net_grad,
        })
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn is_constant(self) -> bool {
        self.idx == CONST
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    fn same_tape(self, other: Var<'t>) {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "mixing tapes");
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        self.tape.binary(self, 1.0, rhs, 1.0, self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        self.tape.binary(self, 1.0, rhs, -1.0, self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        self.tape
            .binary(self, rhs.value, rhs, self.value, self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(rhs);
        let inv = 1.0 / rhs.value;
        self.tape.binary(
            self,
            inv,
            rhs,
            -self.value * inv * inv,
            self.value / rhs.value,
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, self.value / rhs, 1.0 / rhs)
    }
}

/// Scalar arithmetic shared by plain evaluation and taped differentiation.
///
/// Selection operations (`max_of`, `min_of`, `max_c`) return one operand
/// unchanged, so the derivative follows the active branch. Ties select the
/// second operand.
pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    /// A constant in the same evaluation context as `self`.
    fn lift(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn sigmoid(self) -> Self;
    fn max_of(self, other: Self) -> Self;
    fn min_of(self, other: Self) -> Self;
    fn max_c(self, c: f64) -> Self {
        self.max_of(self.lift(c))
    }
    fn min_c(self, c: f64) -> Self {
        self.min_of(self.lift(c))
    }
    /// Pre-activation output of the policy network at `inputs`.
    fn policy_net(net: &MlpParams, inputs: [Self; 4]) -> Self;
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    fn value(self) -> f64 {
        self
    }
    fn lift(self, c: f64) -> f64 {
        c
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn powf(self, p: f64) -> f64 {
        f64::powf(self, p)
    }
    fn sigmoid(self) -> f64 {
        sigmoid(self)
    }
    fn max_of(self, other: f64) -> f64 {
        if self > other {
            self
        } else {
            other
        }
    }
    fn min_of(self, other: f64) -> f64 {
        if self < other {
            self
        } else {
            other
        }
    }
    fn policy_net(net: &MlpParams, inputs: [f64; 4]) -> f64 {
        net.evaluate(inputs)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        self.value
    }
    fn lift(self, c: f64) -> Self {
        self.tape.constant(c)
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(self, e, e)
    }
    fn ln(self) -> Self {
        self.tape.unary(self, self.value.ln(), 1.0 / self.value)
    }
    fn powf(self, p: f64) -> Self {
        let v = self.value.powf(p);
        let d = p * self.value.powf(p - 1.0);
        self.tape.unary(self, v, d)
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        self.tape.unary(self, s, s * (1.0 - s))
    }
    fn max_of(self, other: Self) -> Self {
        if self.value > other.value {
            self
        } else {
            other
        }
    }
    fn min_of(self, other: Self) -> Self {
        if self.value < other.value {
            self
        } else {
            other
        }
    }
    fn policy_net(net: &MlpParams, inputs: [Self; 4]) -> Self {
        inputs[0].tape.record_net(net, inputs)
    }
}
