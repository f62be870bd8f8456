//! FiLM-NMN trunk: stem convnet plus an instruction-shaped tree of
//! modules sharing one convolution, each specialized by per-token FiLM
//! coefficients.
//!
//! Module formula: `m_x(h_l, h_r) = ReLU((1 + γ_x) ⊙ (W_m ∗ [h_l; h_r]) ⊕ β_x)`,
//! with `h_r` zeroed for unary modules. A descriptor chain applies the
//! shape module first and the color module outside it; relations are
//! binary roots; the agent operand uses the dedicated agent module.

use gridlu_env::{ColorId, Shape};
use instruction_lang::{Operand, RelInstruction, Relation};

use crate::ops::{concat_channels, film, film_backward, relu, relu_backward, split_channels, Conv2d, ConvCache};
use crate::tensor::{Scalar, Tensor};

/// Number of FiLM-specialized modules: 3 colors, 3 shapes, 5 relations,
/// and the agent module.
pub const NUM_MODULE_TOKENS: usize = 12;

/// Token identifying one module. `index` fixes the row used in the FiLM
/// coefficient tables and in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleToken {
    Color(ColorId),
    Shape(Shape),
    Relation(Relation),
    Agent,
}

impl ModuleToken {
    pub fn index(self) -> usize {
        match self {
            ModuleToken::Color(c) => ColorId::ALL.iter().position(|&x| x == c).unwrap(),
            ModuleToken::Shape(s) => 3 + Shape::ALL.iter().position(|&x| x == s).unwrap(),
            ModuleToken::Relation(r) => 6 + Relation::ALL.iter().position(|&x| x == r).unwrap(),
            ModuleToken::Agent => 11,
        }
    }
}

/// Stem activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StemEval<F: Scalar> {
    z1: Tensor<F>,
    cache1: ConvCache<F>,
    z2: Tensor<F>,
    cache2: ConvCache<F>,
    /// `ReLU`-activated stem output, the `h_stem` consumed by modules.
    pub h: Tensor<F>,
}

/// Where a module draws an input from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeInput {
    Stem,
    Node(usize),
    /// All-zeros right operand of a unary module.
    Zero,
}

#[derive(Debug, Clone)]
struct NodeEval<F: Scalar> {
    token: usize,
    left: NodeInput,
    right: NodeInput,
    conv_cache: ConvCache<F>,
    /// Pre-FiLM convolution output.
    z: Tensor<F>,
    /// Post-FiLM, pre-ReLU activation (the ReLU mask source).
    pre_relu: Tensor<F>,
    post: Tensor<F>,
}

/// Trace of one standalone module application.
#[derive(Debug, Clone)]
pub struct ModuleTrace<F: Scalar> {
    node: NodeEval<F>,
    unary: bool,
}

impl<F: Scalar> ModuleTrace<F> {
    pub fn out(&self) -> &Tensor<F> {
        &self.node.post
    }
}

/// Full evaluation trace of the NMN on one (instruction, image) pair.
#[derive(Debug, Clone)]
pub struct NmnEval<F: Scalar> {
    pub stem: StemEval<F>,
    nodes: Vec<NodeEval<F>>,
}

impl<F: Scalar> NmnEval<F> {
    /// Root module output, shape `[5, 5, trunk_c]` at paper geometry.
    pub fn out(&self) -> &Tensor<F> {
        &self.nodes.last().expect("NMN tree is non-empty").post
    }

    /// Number of module applications in the trace.
    pub fn module_count(&self) -> usize {
        self.nodes.len()
    }

    /// Longest module chain from a leaf to the root.
    pub fn depth(&self) -> usize {
        let mut depths = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            let d = |inp: NodeInput| match inp {
                NodeInput::Node(j) => depths[j],
                _ => 0,
            };
            depths[i] = 1 + d(n.left).max(d(n.right));
        }
        *depths.last().unwrap()
    }
}

/// Weights of the FiLM-NMN trunk.
#[derive(Debug, Clone)]
pub struct NmnTrunk<F: Scalar> {
    /// Stem: 8x8 convolution, stride 8, no padding.
    pub conv1: Conv2d<F>,
    /// Stem: 3x3 convolution, stride 1, no padding.
    pub conv2: Conv2d<F>,
    /// Shared module convolution, 3x3 SAME over concatenated operands,
    /// bias-free: the per-token β plays the bias role.
    pub module_conv: Conv2d<F>,
    /// Per-token FiLM multiplier table, `[NUM_MODULE_TOKENS, trunk_c]`.
    pub gamma: Tensor<F>,
    /// Per-token FiLM bias table, `[NUM_MODULE_TOKENS, trunk_c]`.
    pub beta: Tensor<F>,
}

impl<F: Scalar> NmnTrunk<F> {
    pub fn new(in_c: usize, stem_c1: usize, trunk_c: usize) -> Self {
        NmnTrunk {
            conv1: Conv2d::new(8, 8, in_c, stem_c1, 8, 0, true),
            conv2: Conv2d::new(3, 3, stem_c1, trunk_c, 1, 0, true),
            module_conv: Conv2d::same(3, 2 * trunk_c, trunk_c, false),
            gamma: Tensor::zeros(&[NUM_MODULE_TOKENS, trunk_c]),
            beta: Tensor::zeros(&[NUM_MODULE_TOKENS, trunk_c]),
        }
    }

    pub fn trunk_channels(&self) -> usize {
        self.gamma.shape()[1]
    }

    fn film_rows(&self, token: usize) -> (&[F], &[F]) {
        let c = self.trunk_channels();
        (
            &self.gamma.data()[token * c..(token + 1) * c],
            &self.beta.data()[token * c..(token + 1) * c],
        )
    }

    /// Stem convnet: two ReLU convolutions taking the image to the
    /// spatial feature map consumed by every leaf module.
    pub fn stem_forward(&self, image: &Tensor<F>) -> StemEval<F> {
        let (z1, cache1) = self.conv1.forward(image);
        let a1 = relu(&z1);
        let (z2, cache2) = self.conv2.forward(&a1);
        let h = relu(&z2);
        StemEval {
            z1,
            cache1,
            z2,
            cache2,
            h,
        }
    }

    /// Gradient of the stem alone: takes dL/dh_stem, accumulates into
    /// `grads`, returns dL/dimage.
    pub fn stem_backward(
        &self,
        eval: &StemEval<F>,
        dh: &Tensor<F>,
        grads: &mut NmnTrunk<F>,
    ) -> Tensor<F> {
        let dz2 = relu_backward(&eval.z2, dh);
        let da1 = self.conv2.backward(
            &eval.cache2,
            &dz2,
            &mut grads.conv2.w,
            grads.conv2.b.as_mut(),
        );
        let dz1 = relu_backward(&eval.z1, &da1);
        self.conv1.backward(
            &eval.cache1,
            &dz1,
            &mut grads.conv1.w,
            grads.conv1.b.as_mut(),
        )
    }

    /// Single module application with a trace for `module_backward`.
    /// `h_r = None` marks a unary module (zeroed right operand).
    pub fn module_forward(
        &self,
        token: ModuleToken,
        h_l: &Tensor<F>,
        h_r: Option<&Tensor<F>>,
    ) -> ModuleTrace<F> {
        ModuleTrace {
            unary: h_r.is_none(),
            node: self.module_eval(token.index(), h_l, h_r, NodeInput::Stem, NodeInput::Zero),
        }
    }

    /// Backward through one traced module application: accumulates into
    /// `grads` and returns (dh_l, dh_r); dh_r is `None` for unary modules.
    pub fn module_backward(
        &self,
        trace: &ModuleTrace<F>,
        dout: &Tensor<F>,
        grads: &mut NmnTrunk<F>,
    ) -> (Tensor<F>, Option<Tensor<F>>) {
        let c = self.trunk_channels();
        let node = &trace.node;
        let dpre = relu_backward(&node.pre_relu, dout);
        let (g, _) = self.film_rows(node.token);
        let (dgamma_all, dbeta_all) = (grads.gamma.data_mut(), grads.beta.data_mut());
        let dz = {
            let dg = &mut dgamma_all[node.token * c..(node.token + 1) * c];
            let db = &mut dbeta_all[node.token * c..(node.token + 1) * c];
            film_backward(&node.z, g, &dpre, dg, db)
        };
        let djoint = self
            .module_conv
            .backward(&node.conv_cache, &dz, &mut grads.module_conv.w, None);
        let (dl, dr) = split_channels(&djoint, c);
        (dl, (!trace.unary).then_some(dr))
    }

    fn module_eval(
        &self,
        token: usize,
        h_l: &Tensor<F>,
        h_r: Option<&Tensor<F>>,
        left: NodeInput,
        right: NodeInput,
    ) -> NodeEval<F> {
        let zero;
        let h_r = match h_r {
            Some(t) => t,
            None => {
                zero = h_l.zeros_like();
                &zero
            }
        };
        let joint = concat_channels(h_l, h_r);
        let (z, conv_cache) = self.module_conv.forward(&joint);
        let (g, b) = self.film_rows(token);
        let pre_relu = film(&z, g, b);
        let post = relu(&pre_relu);
        NodeEval {
            token,
            left,
            right,
            conv_cache,
            z,
            pre_relu,
            post,
        }
    }

    /// Evaluates the module tree mirroring the instruction AST.
    pub fn forward(&self, instr: &RelInstruction, image: &Tensor<F>) -> NmnEval<F> {
        let stem = self.stem_forward(image);
        let mut nodes: Vec<NodeEval<F>> = Vec::with_capacity(5);

        let eval_operand = |nodes: &mut Vec<NodeEval<F>>, op: &Operand| -> NodeInput {
            let chain: Vec<ModuleToken> = match op {
                Operand::Agent => vec![ModuleToken::Agent],
                Operand::Object(d) => {
                    // Shape module innermost, color module outside it.
                    let mut v = Vec::new();
                    if let Some(s) = d.shape {
                        v.push(ModuleToken::Shape(s));
                    }
                    if let Some(c) = d.color {
                        v.push(ModuleToken::Color(c));
                    }
                    v
                }
            };
            assert!(!chain.is_empty(), "descriptor chains are never empty");
            let mut src = NodeInput::Stem;
            for tok in chain {
                let h_l = match src {
                    NodeInput::Stem => &stem.h,
                    NodeInput::Node(i) => &nodes[i].post,
                    NodeInput::Zero => unreachable!(),
                };
                let node = self.module_eval(tok.index(), h_l, None, src, NodeInput::Zero);
                nodes.push(node);
                src = NodeInput::Node(nodes.len() - 1);
            }
            src
        };

        let left = eval_operand(&mut nodes, &instr.left);
        let right = eval_operand(&mut nodes, &instr.right);
        let (h_l, h_r) = match (left, right) {
            (NodeInput::Node(i), NodeInput::Node(j)) => (&nodes[i].post, &nodes[j].post),
            _ => unreachable!("operand chains always produce a node"),
        };
        let root = self.module_eval(
            ModuleToken::Relation(instr.relation).index(),
            h_l,
            Some(h_r),
            left,
            right,
        );
        nodes.push(root);
        NmnEval { stem, nodes }
    }

    /// Backward through the module tree and stem.
    ///
    /// `dout` is dL/d(root output); `dstem_extra` is an optional direct
    /// gradient on `h_stem` (the policy merge path). Parameter gradients
    /// accumulate into `grads`; the image gradient is returned.
    pub fn backward(
        &self,
        eval: &NmnEval<F>,
        dout: &Tensor<F>,
        dstem_extra: Option<&Tensor<F>>,
        grads: &mut NmnTrunk<F>,
    ) -> Tensor<F> {
        let c = self.trunk_channels();
        let mut dnodes: Vec<Option<Tensor<F>>> = vec![None; eval.nodes.len()];
        *dnodes.last_mut().unwrap() = Some(dout.clone());
        let mut dstem = match dstem_extra {
            Some(d) => d.clone(),
            None => eval.stem.h.zeros_like(),
        };

        for i in (0..eval.nodes.len()).rev() {
            let node = &eval.nodes[i];
            let dpost = match dnodes[i].take() {
                Some(d) => d,
                None => continue,
            };
            let dpre = relu_backward(&node.pre_relu, &dpost);
            let (g, _) = self.film_rows(node.token);
            let (dgamma_all, dbeta_all) = (grads.gamma.data_mut(), grads.beta.data_mut());
            // Split-borrow the token's rows out of the gradient tables.
            let dz = {
                let dg = &mut dgamma_all[node.token * c..(node.token + 1) * c];
                let db = &mut dbeta_all[node.token * c..(node.token + 1) * c];
                film_backward(&node.z, g, &dpre, dg, db)
            };
            let djoint = self
                .module_conv
                .backward(&node.conv_cache, &dz, &mut grads.module_conv.w, None);
            let (dl, dr) = split_channels(&djoint, c);
            for (input, d) in [(node.left, dl), (node.right, dr)] {
                match input {
                    NodeInput::Stem => dstem.add_assign(&d),
                    NodeInput::Node(j) => match &mut dnodes[j] {
                        Some(acc) => acc.add_assign(&d),
                        slot => *slot = Some(d),
                    },
                    NodeInput::Zero => {}
                }
            }
        }
        self.stem_backward(&eval.stem, &dstem, grads)
    }
}
