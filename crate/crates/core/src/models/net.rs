use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// Which language branch the model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Averaged phrase embeddings of P, R and S through a dense layer.
    Tuple,
    /// LSTM over the question's token embeddings.
    Q,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Tuple => "tuple",
            Variant::Q => "q",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "tuple" => Some(Variant::Tuple),
            "q" => Some(Variant::Q),
            _ => None,
        }
    }
}

/// Image input of the model. `None` removes the image branch entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Attended,
    Holistic,
    None,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Attended => "attended",
            FeatureMode::Holistic => "holistic",
            FeatureMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<FeatureMode> {
        match s {
            "attended" => Some(FeatureMode::Attended),
            "holistic" => Some(FeatureMode::Holistic),
            "none" => Some(FeatureMode::None),
            _ => None,
        }
    }

    pub fn is_blind(self) -> bool {
        self == FeatureMode::None
    }
}

/// One training or evaluation item. Label 0 is "yes", 1 is "no".
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// `3 * embed_dim` averaged tuple embedding.
    pub tuple: Vec<f64>,
    /// Token embeddings of the question, in order.
    pub tokens: Vec<Vec<f64>>,
    /// Scene features; ignored by blind models.
    pub image: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    /// `1 x out`
    pub b: Array2<f64>,
}

/// Gate blocks are laid out `[input | forget | cell | output]` along the
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array2<f64>,
}

/// All parameters of a verifier. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub lang: Option<Dense>,
    pub lstm: Option<Lstm>,
    pub image: Option<Dense>,
    pub hidden: Dense,
    pub out: Dense,
}

impl Params {
    /// Named tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        let mut v = Vec::new();
        if let Some(d) = &self.lang {
            v.push(("lang_w", &d.w));
            v.push(("lang_b", &d.b));
        }
        if let Some(l) = &self.lstm {
            v.push(("lstm_wx", &l.wx));
            v.push(("lstm_wh", &l.wh));
            v.push(("lstm_b", &l.b));
        }
        if let Some(d) = &self.image {
            v.push(("image_w", &d.w));
            v.push(("image_b", &d.b));
        }
        v.push(("hidden_w", &self.hidden.w));
        v.push(("hidden_b", &self.hidden.b));
        v.push(("out_w", &self.out.w));
        v.push(("out_b", &self.out.b));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        let mut v = Vec::new();
        if let Some(d) = &mut self.lang {
            v.push(("lang_w", &mut d.w));
            v.push(("lang_b", &mut d.b));
        }
        if let Some(l) = &mut self.lstm {
            v.push(("lstm_wx", &mut l.wx));
            v.push(("lstm_wh", &mut l.wh));
            v.push(("lstm_b", &mut l.b));
        }
        if let Some(d) = &mut self.image {
            v.push(("image_w", &mut d.w));
            v.push(("image_b", &mut d.b));
        }
        v.push(("hidden_w", &mut self.hidden.w));
        v.push(("hidden_b", &mut self.hidden.b));
        v.push(("out_w", &mut self.out.w));
        v.push(("out_b", &mut self.out.b));
        v
    }

    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// A verification network: language branch, optional image branch, fusion
/// by pointwise product, a tanh hidden layer and a two-way softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierModel {
    pub variant: Variant,
    pub features: FeatureMode,
    pub embed_dim: usize,
    pub hidden: usize,
    /// Zero for blind models.
    pub image_dim: usize,
    pub dropout: f64,
    pub params: Params,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..=a))
}

fn dense(inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Dense {
    Dense {
        w: glorot(inp, out, rng),
        b: Array2::zeros((1, out)),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Step {
    x: Array2<f64>,
    mask: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tc: Array2<f64>,
}

struct Cache {
    lang_x: Option<Array2<f64>>,
    steps: Vec<Step>,
    lang: Array2<f64>,
    img_x: Option<Array2<f64>>,
    img: Option<Array2<f64>>,
    d1: Option<Array2<f64>>,
    fused: Array2<f64>,
    u: Array2<f64>,
    d2: Option<Array2<f64>>,
    ud: Array2<f64>,
    probs: Array2<f64>,
    logp: Array2<f64>,
}

fn rows(batch: &[&Example], width: usize, get: impl Fn(&Example) -> &[f64]) -> Array2<f64> {
    let mut m = Array2::zeros((batch.len(), width));
    for (r, ex) in batch.iter().enumerate() {
        m.row_mut(r).assign(&ndarray::ArrayView1::from(get(ex)));
    }
    m
}

fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

impl VerifierModel {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn new(variant: Variant, features: FeatureMode, embed_dim: usize, hidden: usize, image_dim: usize, seed: u64) -> Self {
        let mut rng = seed::derived_rng(seed, "model/init");
        let (lang, lstm) = match variant {
            Variant::Tuple => (Some(dense(3 * embed_dim, hidden, &mut rng)), None),
            Variant::Q => (
                None,
                Some(Lstm {
                    wx: glorot(embed_dim, 4 * hidden, &mut rng),
                    wh: glorot(hidden, 4 * hidden, &mut rng),
                    b: Array2::zeros((1, 4 * hidden)),
                }),
            ),
        };
        let image_dim = if features.is_blind() { 0 } else { image_dim };
        let image = (!features.is_blind()).then(|| dense(image_dim, hidden, &mut rng));
        VerifierModel {
            variant,
            features,
            embed_dim,
            hidden,
            image_dim,
            dropout: 0.5,
            params: Params {
                lang,
                lstm,
                image,
                hidden: dense(hidden, hidden, &mut rng),
                out: dense(hidden, 2, &mut rng),
            },
        }
    }

    fn check(&self, ex: &Example) -> Result<()> {
        match self.variant {
            Variant::Tuple if ex.tuple.len() != 3 * self.embed_dim => Err(Error::Dimension(format!(
                "tuple input has {} values, model expects {}",
                ex.tuple.len(),
                3 * self.embed_dim
            ))),
            Variant::Q => match ex.tokens.iter().find(|t| t.len() != self.embed_dim) {
                Some(t) => Err(Error::Dimension(format!(
                    "token embedding has {} values, model expects {}",
                    t.len(),
                    self.embed_dim
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }?;
        if !self.features.is_blind() && ex.image.len() != self.image_dim {
            return Err(Error::Dimension(format!(
                "image input has {} values, model expects {}",
                ex.image.len(),
                self.image_dim
            )));
        }
        if ex.label > 1 {
            return Err(Error::Dimension(format!("label {} is not 0 or 1", ex.label)));
        }
        Ok(())
    }

    fn lstm_forward(&self, batch: &[&Example], steps: &mut Vec<Step>) -> Array2<f64> {
        let l = self.params.lstm.as_ref().expect("q model has an lstm");
        let (b, h, e) = (batch.len(), self.hidden, self.embed_dim);
        let tmax = batch.iter().map(|ex| ex.tokens.len()).max().unwrap_or(0);
        let mut hs = Array2::zeros((b, h));
        let mut cs = Array2::zeros((b, h));
        for t in 0..tmax {
            let mut x = Array2::zeros((b, e));
            let mut mask = Array2::zeros((b, 1));
            for (r, ex) in batch.iter().enumerate() {
                if let Some(tok) = ex.tokens.get(t) {
                    x.row_mut(r).assign(&ndarray::ArrayView1::from(tok.as_slice()));
                    mask[[r, 0]] = 1.0;
                }
            }
            let a = x.dot(&l.wx) + hs.dot(&l.wh) + &l.b;
            let i = a.slice(s![.., 0..h]).mapv(sigmoid);
            let f = a.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = a.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = a.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            let c_new = &f * &cs + &i * &g;
            let tc = c_new.mapv(f64::tanh);
            let h_new = &o * &tc;
            // Finished sequences carry their state through padded steps.
            let keep = mask.mapv(|m| 1.0 - m);
            let c_next = &c_new * &mask + &cs * &keep;
            let h_next = &h_new * &mask + &hs * &keep;
            steps.push(Step {
                x,
                mask,
                h_prev: std::mem::replace(&mut hs, h_next),
                c_prev: std::mem::replace(&mut cs, c_next),
                i,
                f,
                g,
                o,
                tc,
            });
        }
        hs
    }

    fn forward_cache(&self, batch: &[&Example], mut rng: Option<&mut ChaCha8Rng>) -> Result<Cache> {
        for ex in batch {
            self.check(ex)?;
        }
        let mut steps = Vec::new();
        let (lang_x, lang) = match self.variant {
            Variant::Tuple => {
                let d = self.params.lang.as_ref().expect("tuple model has a dense branch");
                let x = rows(batch, 3 * self.embed_dim, |ex| &ex.tuple);
                let l = (x.dot(&d.w) + &d.b).mapv(f64::tanh);
                (Some(x), l)
            }
            Variant::Q => (None, self.lstm_forward(batch, &mut steps)),
        };
        let (img_x, img, fused) = match &self.params.image {
            Some(d) => {
                let x = rows(batch, self.image_dim, |ex| &ex.image);
                let im = (x.dot(&d.w) + &d.b).mapv(f64::tanh);
                let fused = &lang * &im;
                (Some(x), Some(im), fused)
            }
            None => (None, None, lang.clone()),
        };
        let shape = fused.dim();
        let d1 = rng.as_deref_mut().filter(|_| self.dropout > 0.0).map(|r| dropout_mask(shape, self.dropout, r));
        let fused_d = match &d1 {
            Some(m) => &fused * m,
            None => fused,
        };
        let u = (fused_d.dot(&self.params.hidden.w) + &self.params.hidden.b).mapv(f64::tanh);
        let d2 = rng.filter(|_| self.dropout > 0.0).map(|r| dropout_mask(u.dim(), self.dropout, r));
        let ud = match &d2 {
            Some(m) => &u * m,
            None => u.clone(),
        };
        let logits = ud.dot(&self.params.out.w) + &self.params.out.b;
        let mut logp = logits.clone();
        for mut row in logp.rows_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        let probs = logp.mapv(f64::exp);
        Ok(Cache {
            lang_x,
            steps,
            lang,
            img_x,
            img,
            d1,
            fused: fused_d,
            u,
            d2,
            ud,
            probs,
            logp,
        })
    }

    /// Class probabilities `[yes, no]` for a batch. Dropout masks are drawn
    /// from `seed` only when `train_mode` is set.
    pub fn forward_batch(&self, batch: &[&Example], train_mode: bool, seed: u64) -> Result<Vec<[f64; 2]>> {
        let mut rng = seed::rng(seed);
        let cache = self.forward_cache(batch, train_mode.then_some(&mut rng))?;
        Ok(cache.probs.rows().into_iter().map(|r| [r[0], r[1]]).collect())
    }

    pub fn forward(&self, ex: &Example, train_mode: bool, seed: u64) -> Result<[f64; 2]> {
        Ok(self.forward_batch(&[ex], train_mode, seed)?[0])
    }

    /// Eval-mode probabilities for many items, in chunks.
    pub fn predict(&self, items: &[Example]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(256) {
            let refs: Vec<&Example> = chunk.iter().collect();
            out.extend(self.forward_batch(&refs, false, 0)?);
        }
        Ok(out)
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, batch: &[&Example], train_mode: bool, seed: u64) -> Result<f64> {
        let mut rng = seed::rng(seed);
        let cache = self.forward_cache(batch, train_mode.then_some(&mut rng))?;
        Ok(mean_nll(&cache.logp, batch))
    }

    /// Mean cross-entropy of a batch and its gradient with respect to
    /// every parameter, through time for the LSTM.
    pub fn loss_and_gradients(&self, batch: &[&Example], train_mode: bool, seed: u64) -> Result<(f64, Params)> {
        self.loss_gradients_probs(batch, train_mode, seed).map(|(l, g, _)| (l, g))
    }

    pub(crate) fn loss_gradients_probs(
        &self,
        batch: &[&Example],
        train_mode: bool,
        seed: u64,
    ) -> Result<(f64, Params, Array2<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut rng = seed::rng(seed);
        let c = self.forward_cache(batch, train_mode.then_some(&mut rng))?;
        let loss = mean_nll(&c.logp, batch);
        let n = batch.len() as f64;
        let mut g = self.params.zeros_like();

        let mut dlogits = c.probs.clone();
        for (r, ex) in batch.iter().enumerate() {
            dlogits[[r, ex.label]] -= 1.0;
        }
        dlogits /= n;
        g.out.w = c.ud.t().dot(&dlogits);
        g.out.b = dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut du = dlogits.dot(&self.params.out.w.t());
        if let Some(m) = &c.d2 {
            du *= m;
        }
        Zip::from(&mut du).and(&c.u).for_each(|d, &u| *d *= 1.0 - u * u);
        g.hidden.w = c.fused.t().dot(&du);
        g.hidden.b = du.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut dfused = du.dot(&self.params.hidden.w.t());
        if let Some(m) = &c.d1 {
            dfused *= m;
        }

        let dlang = match (&c.img, &c.img_x) {
            (Some(im), Some(x)) => {
                let mut dim = &dfused * &c.lang;
                Zip::from(&mut dim).and(im).for_each(|d, &v| *d *= 1.0 - v * v);
                let gi = g.image.as_mut().expect("image grads");
                gi.w = x.t().dot(&dim);
                gi.b = dim.sum_axis(Axis(0)).insert_axis(Axis(0));
                &dfused * im
            }
            _ => dfused,
        };

        match self.variant {
            Variant::Tuple => {
                let mut da = dlang;
                Zip::from(&mut da).and(&c.lang).for_each(|d, &l| *d *= 1.0 - l * l);
                let gl = g.lang.as_mut().expect("tuple grads");
                gl.w = c.lang_x.as_ref().expect("tuple input").t().dot(&da);
                gl.b = da.sum_axis(Axis(0)).insert_axis(Axis(0));
            }
            Variant::Q => self.lstm_backward(&c.steps, dlang, g.lstm.as_mut().expect("lstm grads")),
        }
        Ok((loss, g, c.probs))
    }

    fn lstm_backward(&self, steps: &[Step], dlang: Array2<f64>, g: &mut Lstm) {
        let l = self.params.lstm.as_ref().expect("q model has an lstm");
        let h = self.hidden;
        let b = dlang.nrows();
        let mut dh = dlang;
        let mut dc: Array2<f64> = Array2::zeros((b, h));
        let mut da = Array2::zeros((b, 4 * h));
        for st in steps.iter().rev() {
            let keep = st.mask.mapv(|m| 1.0 - m);
            let dh_new = &dh * &st.mask;
            let mut dc_new = &dc * &st.mask;
            Zip::from(&mut dc_new)
                .and(&dh_new)
                .and(&st.o)
                .and(&st.tc)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
            {
                let (mut dai, rest) = da.view_mut().split_at(Axis(1), h);
                let (mut daf, rest) = rest.split_at(Axis(1), h);
                let (mut dag, mut dao) = rest.split_at(Axis(1), h);
                Zip::from(&mut dai)
                    .and(&dc_new)
                    .and(&st.g)
                    .and(&st.i)
                    .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
                Zip::from(&mut daf)
                    .and(&dc_new)
                    .and(&st.c_prev)
                    .and(&st.f)
                    .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
                Zip::from(&mut dag)
                    .and(&dc_new)
                    .and(&st.i)
                    .and(&st.g)
                    .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                Zip::from(&mut dao)
                    .and(&dh_new)
                    .and(&st.tc)
                    .and(&st.o)
                    .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
            }
            g.wx += &st.x.t().dot(&da);
            g.wh += &st.h_prev.t().dot(&da);
            g.b += &da.sum_axis(Axis(0)).insert_axis(Axis(0));
            dh = da.dot(&l.wh.t()) + &dh * &keep;
            dc = &dc_new * &st.f + &dc * &keep;
        }
    }

    /// Number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.params.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn mean_nll(logp: &Array2<f64>, batch: &[&Example]) -> f64 {
    -batch.iter().enumerate().map(|(r, ex)| logp[[r, ex.label]]).sum::<f64>() / batch.len() as f64
}

/// Elementwise product of two probability pairs, each floored at 1e-12,
/// renormalized.
pub fn ensemble_predict(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    const FLOOR: f64 = 1e-12;
    let y = a[0].max(FLOOR) * b[0].max(FLOOR);
    let n = a[1].max(FLOOR) * b[1].max(FLOOR);
    [y / (y + n), n / (y + n)]
}

/// Argmax over `[yes, no]`; ties answer "yes".
pub fn predict_answer(p: [f64; 2]) -> crate::scene::Answer {
    if p[0] >= p[1] {
        crate::scene::Answer::Yes
    } else {
        crate::scene::Answer::No
    }
}
