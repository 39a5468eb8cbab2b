use super::{Builder, ConvBn, Fan};
use crate::graph::{Graph, Var};
use crate::params::ParamId;

const EPS: f32 = 1e-3;

/// (expand ratio, kernel, stride, input channels, output channels, layers)
const STAGES: [(usize, usize, usize, usize, usize, usize); 7] = [
    (1, 3, 1, 32, 16, 1),
    (6, 3, 2, 16, 24, 2),
    (6, 5, 2, 24, 40, 2),
    (6, 3, 2, 40, 80, 3),
    (6, 5, 1, 80, 112, 3),
    (6, 5, 2, 112, 192, 4),
    (6, 3, 1, 192, 320, 1),
];
const HEAD: usize = 1280;

struct MbConv {
    expand: Option<ConvBn>,
    depthwise: ConvBn,
    se_reduce: (ParamId, ParamId),
    se_expand: (ParamId, ParamId),
    project: ConvBn,
    residual: bool,
}

impl MbConv {
    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut y = x;
        if let Some(e) = &self.expand {
            y = e.forward(g, y);
            y = g.silu(y);
        }
        y = self.depthwise.forward(g, y);
        y = g.silu(y);
        let s = g.global_avg_pool(y);
        let s = g.linear(s, self.se_reduce.0, Some(self.se_reduce.1));
        let s = g.silu(s);
        let s = g.linear(s, self.se_expand.0, Some(self.se_expand.1));
        let s = g.sigmoid(s);
        y = g.channel_mul(y, s);
        y = self.project.forward(g, y);
        if self.residual {
            y = g.add(y, x);
        }
        y
    }
}

pub(crate) struct EfficientNet {
    stem: ConvBn,
    blocks: Vec<MbConv>,
    top: ConvBn,
    pub head: (ParamId, ParamId),
}

/// Squeeze-excitation projection as a linear layer: Kaiming-normal
/// (fan-out) weight, zero bias.
fn se_linear(b: &mut Builder, name: &str, o: usize, f: usize) -> (ParamId, ParamId) {
    let w = b.conv(name, o, f, 1, Fan::Out);
    let t = b.store.get(w).clone();
    *b.store.get_mut(w) = crate::Tensor::new(vec![o, f], t.into_data()).expect("same size");
    let bias = b
        .store
        .add(format!("{name}.bias"), crate::Tensor::zeros(&[o]), crate::ParamKind::Weight);
    (w, bias)
}

impl EfficientNet {
    pub fn build(b: &mut Builder, classes: usize) -> Self {
        let stem = ConvBn::build(b, "features.0.0", "features.0.1", 32, 3, 3, 2, EPS);
        let mut blocks = Vec::new();
        for (si, &(ratio, k, stride, cin, cout, layers)) in STAGES.iter().enumerate() {
            for li in 0..layers {
                let p = format!("features.{}.{li}.block", si + 1);
                let in_ch = if li == 0 { cin } else { cout };
                let s = if li == 0 { stride } else { 1 };
                let hidden = in_ch * ratio;
                let mut idx = 0;
                let mut next = || {
                    idx += 1;
                    idx - 1
                };
                let expand = (ratio != 1).then(|| {
                    let i = next();
                    ConvBn::build(b, &format!("{p}.{i}.0"), &format!("{p}.{i}.1"), hidden, in_ch, 1, 1, EPS)
                });
                let i = next();
                let mut depthwise =
                    ConvBn::build(b, &format!("{p}.{i}.0"), &format!("{p}.{i}.1"), hidden, 1, k, s, EPS);
                depthwise.depthwise = true;
                let i = next();
                let squeeze = (in_ch / 4).max(1);
                let se_reduce = se_linear(b, &format!("{p}.{i}.fc1"), squeeze, hidden);
                let se_expand = se_linear(b, &format!("{p}.{i}.fc2"), hidden, squeeze);
                let i = next();
                let project = ConvBn::build(b, &format!("{p}.{i}.0"), &format!("{p}.{i}.1"), cout, hidden, 1, 1, EPS);
                blocks.push(MbConv {
                    expand,
                    depthwise,
                    se_reduce,
                    se_expand,
                    project,
                    residual: s == 1 && in_ch == cout,
                });
            }
        }
        let top = ConvBn::build(b, "features.8.0", "features.8.1", HEAD, 320, 1, 1, EPS);
        let head = b.head("classifier.1", classes, HEAD);
        EfficientNet { stem, blocks, top, head }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let y = self.stem.forward(g, x);
        let mut y = g.silu(y);
        for block in &self.blocks {
            y = block.forward(g, y);
        }
        let y = self.top.forward(g, y);
        let y = g.silu(y);
        let f = g.global_avg_pool(y);
        g.linear(f, self.head.0, Some(self.head.1))
    }
}
