use super::{Builder, ConvBn};
use crate::graph::{Graph, Var};
use crate::models::Arch;
use crate::params::ParamId;

const EPS: f32 = 1e-5;

struct Block {
    convs: Vec<ConvBn>,
    downsample: Option<ConvBn>,
}

impl Block {
    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut y = x;
        for (i, c) in self.convs.iter().enumerate() {
            y = c.forward(g, y);
            if i + 1 < self.convs.len() {
                y = g.relu(y);
            }
        }
        let shortcut = match &self.downsample {
            Some(d) => d.forward(g, x),
            None => x,
        };
        let y = g.add(y, shortcut);
        g.relu(y)
    }
}

pub(crate) struct ResNet {
    stem: ConvBn,
    blocks: Vec<Block>,
    pub head: (ParamId, ParamId),
}

impl ResNet {
    pub fn build(b: &mut Builder, arch: Arch, classes: usize) -> Self {
        let (layers, bottleneck) = match arch {
            Arch::Resnet18 => ([2, 2, 2, 2], false),
            Arch::Resnet34 => ([3, 4, 6, 3], false),
            Arch::Resnet50 => ([3, 4, 6, 3], true),
            _ => unreachable!("not a resnet"),
        };
        let expansion = if bottleneck { 4 } else { 1 };
        let stem = ConvBn::build(b, "conv1", "bn1", 64, 3, 7, 2, EPS);
        let mut blocks = Vec::new();
        let mut in_ch = 64;
        for (li, &count) in layers.iter().enumerate() {
            let width = 64 << li;
            for bi in 0..count {
                let stride = if li > 0 && bi == 0 { 2 } else { 1 };
                let p = format!("layer{}.{bi}", li + 1);
                let out_ch = width * expansion;
                let convs = if bottleneck {
                    vec![
                        ConvBn::build(b, &format!("{p}.conv1"), &format!("{p}.bn1"), width, in_ch, 1, 1, EPS),
                        ConvBn::build(b, &format!("{p}.conv2"), &format!("{p}.bn2"), width, width, 3, stride, EPS),
                        ConvBn::build(b, &format!("{p}.conv3"), &format!("{p}.bn3"), out_ch, width, 1, 1, EPS),
                    ]
                } else {
                    vec![
                        ConvBn::build(b, &format!("{p}.conv1"), &format!("{p}.bn1"), width, in_ch, 3, stride, EPS),
                        ConvBn::build(b, &format!("{p}.conv2"), &format!("{p}.bn2"), width, width, 3, 1, EPS),
                    ]
                };
                let downsample = (stride != 1 || in_ch != out_ch).then(|| {
                    ConvBn::build(
                        b,
                        &format!("{p}.downsample.0"),
                        &format!("{p}.downsample.1"),
                        out_ch,
                        in_ch,
                        1,
                        stride,
                        EPS,
                    )
                });
                blocks.push(Block { convs, downsample });
                in_ch = out_ch;
            }
        }
        let head = b.head("fc", classes, in_ch);
        ResNet { stem, blocks, head }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut y = self.stem.forward(g, x);
        y = g.relu(y);
        y = g.max_pool(y, 3, 2, 1);
        for block in &self.blocks {
            y = block.forward(g, y);
        }
        let f = g.global_avg_pool(y);
        g.linear(f, self.head.0, Some(self.head.1))
    }
}
