//! Backbones adapted to single-channel input and a small classification head.

mod densenet;
mod efficientnet;
mod resnet;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{BnParams, Graph, Mode, Var};
use crate::params::{Init, ParamId, ParamKind, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Resnet18,
    Resnet34,
    Resnet50,
    Densenet121,
    EfficientnetB0,
}

impl Arch {
    pub const ALL: [Arch; 5] = [
        Arch::Resnet18,
        Arch::Resnet34,
        Arch::Resnet50,
        Arch::Densenet121,
        Arch::EfficientnetB0,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Resnet18 => "resnet18",
            Arch::Resnet34 => "resnet34",
            Arch::Resnet50 => "resnet50",
            Arch::Densenet121 => "densenet121",
            Arch::EfficientnetB0 => "efficientnet_b0",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| NnError::UnknownArch(s.to_string()))
    }
}

/// Registers parameters with torchvision-style names and initialization.
pub(crate) struct Builder {
    pub store: ParamStore,
    init: Init,
}

/// How a convolution weight is initialized (Kaiming normal, ReLU gain).
#[derive(Clone, Copy)]
pub(crate) enum Fan {
    In,
    Out,
}

impl Builder {
    fn new(seed: u64) -> Self {
        Self {
            store: ParamStore::default(),
            init: Init::new(seed),
        }
    }

    /// `[o, c, k, k]` weight; `c = 1` for depthwise.
    pub fn conv(&mut self, name: &str, o: usize, c: usize, k: usize, fan: Fan) -> ParamId {
        let fan = match fan {
            Fan::In => c * k * k,
            Fan::Out => o * k * k,
        };
        let std = (2.0 / fan as f32).sqrt();
        let w = self.init.normal(&[o, c, k, k], std);
        self.store.add(format!("{name}.weight"), w, ParamKind::Weight)
    }

    pub fn bn(&mut self, name: &str, c: usize, eps: f32) -> BnParams {
        BnParams {
            gamma: self
                .store
                .add(format!("{name}.weight"), Tensor::filled(&[c], 1.0), ParamKind::Weight),
            beta: self.store.add(format!("{name}.bias"), Tensor::zeros(&[c]), ParamKind::Weight),
            running_mean: self
                .store
                .add(format!("{name}.running_mean"), Tensor::zeros(&[c]), ParamKind::Buffer),
            running_var: self
                .store
                .add(format!("{name}.running_var"), Tensor::filled(&[c], 1.0), ParamKind::Buffer),
            eps,
            momentum: 0.1,
        }
    }

    /// `[o, f]` weight drawn from `U(±bound)` and a zero bias.
    pub fn linear(&mut self, name: &str, o: usize, f: usize, bound: f32) -> (ParamId, ParamId) {
        let w = self.init.uniform(&[o, f], bound);
        let w = self.store.add(format!("{name}.weight"), w, ParamKind::Weight);
        let b = self.store.add(format!("{name}.bias"), Tensor::zeros(&[o]), ParamKind::Weight);
        (w, b)
    }

    /// Classification head; `U(±0.5/sqrt(f))` weights keep initial logits
    /// small so the untrained loss sits near `ln(classes)`.
    pub fn head(&mut self, name: &str, classes: usize, f: usize) -> (ParamId, ParamId) {
        self.linear(name, classes, f, 0.5 / (f as f32).sqrt())
    }
}

/// Convolution followed by BatchNorm.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvBn {
    pub conv: ParamId,
    pub bn: BnParams,
    pub stride: usize,
    pub pad: usize,
    pub depthwise: bool,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub fn build(b: &mut Builder, conv: &str, bn: &str, o: usize, c: usize, k: usize, stride: usize, eps: f32) -> Self {
        Self {
            conv: b.conv(conv, o, c, k, Fan::Out),
            bn: b.bn(bn, o, eps),
            stride,
            pad: k / 2,
            depthwise: false,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let y = g.conv2d(x, self.conv, self.stride, self.pad, self.depthwise);
        g.batch_norm(y, self.bn)
    }
}

enum Net {
    Resnet(resnet::ResNet),
    Densenet(densenet::DenseNet),
    Efficient(efficientnet::EfficientNet),
}

/// A backbone with its parameters. Input is `[n, 1, h, w]`; the grayscale
/// channel is replicated to three channels before the stem.
pub struct Model {
    arch: Arch,
    classes: usize,
    params: ParamStore,
    net: Net,
    head: (ParamId, ParamId),
}

impl Model {
    pub fn build(arch: Arch, classes: usize, seed: u64) -> Model {
        let mut b = Builder::new(seed);
        let (net, head) = match arch {
            Arch::Resnet18 | Arch::Resnet34 | Arch::Resnet50 => {
                let n = resnet::ResNet::build(&mut b, arch, classes);
                let head = n.head;
                (Net::Resnet(n), head)
            }
            Arch::Densenet121 => {
                let n = densenet::DenseNet::build(&mut b, classes);
                let head = n.head;
                (Net::Densenet(n), head)
            }
            Arch::EfficientnetB0 => {
                let n = efficientnet::EfficientNet::build(&mut b, classes);
                let head = n.head;
                (Net::Efficient(n), head)
            }
        };
        Model {
            arch,
            classes,
            params: b.store,
            net,
            head,
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Weight and bias of the final linear layer.
    pub fn head(&self) -> (ParamId, ParamId) {
        self.head
    }

    /// Records the forward pass of `x[n,1,h,w]` and returns `[n, classes]`
    /// logits.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        assert_eq!(g.value(x).dims4().1, 1, "model input is single-channel");
        let x = g.concat(&[x, x, x]);
        match &self.net {
            Net::Resnet(n) => n.forward(g, x),
            Net::Densenet(n) => n.forward(g, x),
            Net::Efficient(n) => n.forward(g, x),
        }
    }

    /// Inference-mode logits for `x[n,1,h,w]`.
    pub fn logits(&self, x: Tensor) -> Result<Tensor> {
        match x.shape() {
            [_, 1, _, _] => {}
            other => {
                return Err(NnError::Shape {
                    expected: vec![0, 1, 48, 48],
                    got: other.to_vec(),
                })
            }
        }
        let mut g = Graph::new(&self.params, Mode::Eval);
        let x = g.input(x);
        let y = self.forward(&mut g, x);
        Ok(g.value(y).clone())
    }
}
