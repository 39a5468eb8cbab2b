use super::{Builder, Fan};
use crate::graph::{BnParams, Graph, Var};
use crate::params::ParamId;

const EPS: f32 = 1e-5;
const GROWTH: usize = 32;
const BN_SIZE: usize = 4;
const BLOCKS: [usize; 4] = [6, 12, 24, 16];
const STEM: usize = 64;

struct DenseLayer {
    bn1: BnParams,
    conv1: ParamId,
    bn2: BnParams,
    conv2: ParamId,
}

struct Transition {
    bn: BnParams,
    conv: ParamId,
}

pub(crate) struct DenseNet {
    stem_conv: ParamId,
    stem_bn: BnParams,
    blocks: Vec<Vec<DenseLayer>>,
    transitions: Vec<Transition>,
    final_bn: BnParams,
    pub head: (ParamId, ParamId),
}

fn bn_relu_conv(g: &mut Graph, x: Var, bn: BnParams, conv: ParamId, pad: usize) -> Var {
    let y = g.batch_norm(x, bn);
    let y = g.relu(y);
    g.conv2d(y, conv, 1, pad, false)
}

impl DenseNet {
    pub fn build(b: &mut Builder, classes: usize) -> Self {
        let stem_conv = b.conv("features.conv0", STEM, 3, 7, Fan::In);
        let stem_bn = b.bn("features.norm0", STEM, EPS);
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        let mut ch = STEM;
        for (bi, &count) in BLOCKS.iter().enumerate() {
            let mut layers = Vec::new();
            for li in 0..count {
                let p = format!("features.denseblock{}.denselayer{}", bi + 1, li + 1);
                let inner = BN_SIZE * GROWTH;
                layers.push(DenseLayer {
                    bn1: b.bn(&format!("{p}.norm1"), ch, EPS),
                    conv1: b.conv(&format!("{p}.conv1"), inner, ch, 1, Fan::In),
                    bn2: b.bn(&format!("{p}.norm2"), inner, EPS),
                    conv2: b.conv(&format!("{p}.conv2"), GROWTH, inner, 3, Fan::In),
                });
                ch += GROWTH;
            }
            blocks.push(layers);
            if bi + 1 < BLOCKS.len() {
                let p = format!("features.transition{}", bi + 1);
                transitions.push(Transition {
                    bn: b.bn(&format!("{p}.norm"), ch, EPS),
                    conv: b.conv(&format!("{p}.conv"), ch / 2, ch, 1, Fan::In),
                });
                ch /= 2;
            }
        }
        let final_bn = b.bn("features.norm5", ch, EPS);
        let head = b.head("classifier", classes, ch);
        DenseNet {
            stem_conv,
            stem_bn,
            blocks,
            transitions,
            final_bn,
            head,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let y = g.conv2d(x, self.stem_conv, 2, 3, false);
        let y = g.batch_norm(y, self.stem_bn);
        let y = g.relu(y);
        let mut y = g.max_pool(y, 3, 2, 1);
        for (bi, layers) in self.blocks.iter().enumerate() {
            let mut features = vec![y];
            for l in layers {
                let input = if features.len() == 1 {
                    features[0]
                } else {
                    g.concat(&features)
                };
                let h = bn_relu_conv(g, input, l.bn1, l.conv1, 0);
                let h = bn_relu_conv(g, h, l.bn2, l.conv2, 1);
                features.push(h);
            }
            y = g.concat(&features);
            if let Some(t) = self.transitions.get(bi) {
                y = bn_relu_conv(g, y, t.bn, t.conv, 0);
                y = g.avg_pool(y, 2, 2);
            }
        }
        let y = g.batch_norm(y, self.final_bn);
        let y = g.relu(y);
        let f = g.global_avg_pool(y);
        g.linear(f, self.head.0, Some(self.head.1))
    }
}
