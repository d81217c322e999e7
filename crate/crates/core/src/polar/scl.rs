//! Successive-cancellation list decoding with lazy path copying.
//!
//! Layer `λ` of a path holds `2^(n−λ)` LLRs and bit pairs. Paths share
//! layer arrays until one of them writes, at which point the writer gets a
//! private copy. Decisions on information bits are recorded as back-pointers
//! so no per-path bit vectors are ever cloned.

/// Penalty-based path metric update; smaller is better.
#[inline]
fn penalty(llr: f64, bit: u8) -> f64 {
    if (bit == 0 && llr < 0.0) || (bit == 1 && llr > 0.0) {
        llr.abs()
    } else {
        0.0
    }
}

#[inline]
fn f_node(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) { -m } else { m }
}

#[inline]
fn g_node(a: f64, b: f64, u: u8) -> f64 {
    if u == 0 { b + a } else { b - a }
}

struct Decoder<'a> {
    n: usize,
    list: usize,
    frozen: &'a [bool],
    llr: Vec<Vec<f64>>,
    bits: Vec<Vec<[u8; 2]>>,
    path_to_array: Vec<Vec<usize>>,
    refs: Vec<Vec<usize>>,
    free_arrays: Vec<Vec<usize>>,
    free_paths: Vec<usize>,
    active: Vec<bool>,
    metric: Vec<f64>,
    // back-pointers per information bit: (bit, parent path)
    history: Vec<Vec<(u8, usize)>>,
}

impl<'a> Decoder<'a> {
    fn new(channel: &[f64], frozen: &'a [bool], list: usize) -> Self {
        let len = channel.len();
        let n = len.trailing_zeros() as usize;
        let mut llr = Vec::with_capacity(n + 1);
        let mut bits = Vec::with_capacity(n + 1);
        for lambda in 0..=n {
            let width = 1 << (n - lambda);
            llr.push(vec![0.0; width * list]);
            bits.push(vec![[0u8; 2]; width * list]);
        }
        llr[0][..len].copy_from_slice(channel);
        Decoder {
            n,
            list,
            frozen,
            llr,
            bits,
            path_to_array: vec![vec![0; list]; n + 1],
            refs: (0..=n).map(|_| { let mut r = vec![0; list]; r[0] = 1; r }).collect(),
            free_arrays: (0..=n).map(|_| (1..list).rev().collect()).collect(),
            free_paths: (1..list).rev().collect(),
            active: (0..list).map(|l| l == 0).collect(),
            metric: vec![0.0; list],
            history: Vec::new(),
        }
    }

    fn width(&self, lambda: usize) -> usize {
        1 << (self.n - lambda)
    }

    /// Array index for path `l` at `lambda`, copied out if shared.
    fn writable(&mut self, lambda: usize, l: usize) -> usize {
        let s = self.path_to_array[lambda][l];
        if self.refs[lambda][s] == 1 {
            return s;
        }
        let t = self.free_arrays[lambda].pop().expect("array pool exhausted");
        let w = self.width(lambda);
        self.llr[lambda].copy_within(s * w..(s + 1) * w, t * w);
        self.bits[lambda].copy_within(s * w..(s + 1) * w, t * w);
        self.refs[lambda][s] -= 1;
        self.refs[lambda][t] = 1;
        self.path_to_array[lambda][l] = t;
        t
    }

    fn kill(&mut self, l: usize) {
        self.active[l] = false;
        self.free_paths.push(l);
        for lambda in 0..=self.n {
            let s = self.path_to_array[lambda][l];
            self.refs[lambda][s] -= 1;
            if self.refs[lambda][s] == 0 {
                self.free_arrays[lambda].push(s);
            }
        }
    }

    fn clone_path(&mut self, l: usize) -> usize {
        let c = self.free_paths.pop().expect("path pool exhausted");
        self.active[c] = true;
        for lambda in 0..=self.n {
            let s = self.path_to_array[lambda][l];
            self.path_to_array[lambda][c] = s;
            self.refs[lambda][s] += 1;
        }
        self.metric[c] = self.metric[l];
        c
    }

    fn calc_llr(&mut self, lambda: usize, phi: usize) {
        if lambda == 0 {
            return;
        }
        let psi = phi >> 1;
        if phi & 1 == 0 {
            self.calc_llr(lambda - 1, psi);
        }
        let w = self.width(lambda);
        for l in 0..self.list {
            if !self.active[l] {
                continue;
            }
            let dst = self.writable(lambda, l);
            let src = self.path_to_array[lambda - 1][l];
            let (lower, upper) = self.llr.split_at_mut(lambda);
            let prev = &lower[lambda - 1][src * 2 * w..(src + 1) * 2 * w];
            let cur = &mut upper[0][dst * w..(dst + 1) * w];
            if phi & 1 == 0 {
                for (beta, out) in cur.iter_mut().enumerate() {
                    *out = f_node(prev[2 * beta], prev[2 * beta + 1]);
                }
            } else {
                let decided = &self.bits[lambda][dst * w..(dst + 1) * w];
                for (beta, out) in cur.iter_mut().enumerate() {
                    *out = g_node(prev[2 * beta], prev[2 * beta + 1], decided[beta][0]);
                }
            }
        }
    }

    fn update_bits(&mut self, lambda: usize, phi: usize) {
        let psi = phi >> 1;
        let col = psi & 1;
        let w = self.width(lambda);
        for l in 0..self.list {
            if !self.active[l] {
                continue;
            }
            let dst = self.writable(lambda - 1, l);
            let src = self.path_to_array[lambda][l];
            let (lower, upper) = self.bits.split_at_mut(lambda);
            let cur = &upper[0][src * w..(src + 1) * w];
            let prev = &mut lower[lambda - 1][dst * 2 * w..(dst + 1) * 2 * w];
            for beta in 0..w {
                let [a, b] = cur[beta];
                prev[2 * beta][col] = a ^ b;
                prev[2 * beta + 1][col] = b;
            }
        }
        if psi & 1 == 1 {
            self.update_bits(lambda - 1, psi);
        }
    }

    fn top_llr(&self, l: usize) -> f64 {
        self.llr[self.n][self.path_to_array[self.n][l]]
    }

    fn set_top_bit(&mut self, l: usize, phi: usize, bit: u8) {
        let s = self.writable(self.n, l);
        self.bits[self.n][s][phi & 1] = bit;
    }

    fn frozen_bit(&mut self, phi: usize) {
        for l in 0..self.list {
            if self.active[l] {
                self.metric[l] += penalty(self.top_llr(l), 0);
                self.set_top_bit(l, phi, 0);
            }
        }
    }

    fn info_bit(&mut self, phi: usize) {
        let mut candidates: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * self.list);
        for l in 0..self.list {
            if self.active[l] {
                let llr = self.top_llr(l);
                candidates.push((self.metric[l] + penalty(llr, 0), l, 0));
                candidates.push((self.metric[l] + penalty(llr, 1), l, 1));
            }
        }
        let keep = candidates.len().min(self.list);
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut fork = vec![[None::<f64>; 2]; self.list];
        for &(m, l, b) in &candidates[..keep] {
            fork[l][b as usize] = Some(m);
        }
        for (l, f) in fork.iter().enumerate() {
            if self.active[l] && f[0].is_none() && f[1].is_none() {
                self.kill(l);
            }
        }
        let mut record = vec![(0u8, 0usize); self.list];
        for (l, f) in fork.iter().enumerate() {
            match (f[0], f[1]) {
                (Some(m0), Some(m1)) => {
                    let c = self.clone_path(l);
                    self.metric[l] = m0;
                    self.set_top_bit(l, phi, 0);
                    record[l] = (0, l);
                    self.metric[c] = m1;
                    self.set_top_bit(c, phi, 1);
                    record[c] = (1, l);
                }
                (Some(m), None) | (None, Some(m)) => {
                    let b = u8::from(f[0].is_none());
                    self.metric[l] = m;
                    self.set_top_bit(l, phi, b);
                    record[l] = (b, l);
                }
                (None, None) => {}
            }
        }
        self.history.push(record);
    }

    fn run(&mut self) {
        let len = 1 << self.n;
        for phi in 0..len {
            self.calc_llr(self.n, phi);
            if self.frozen[phi] {
                self.frozen_bit(phi);
            } else {
                self.info_bit(phi);
            }
            if phi & 1 == 1 && self.n > 0 {
                self.update_bits(self.n, phi);
            }
        }
    }

    fn trace(&self, mut l: usize) -> Vec<u8> {
        let k = self.history.len();
        let mut out = vec![0u8; k];
        for j in (0..k).rev() {
            let (b, parent) = self.history[j][l];
            out[j] = b;
            l = parent;
        }
        out
    }

    /// Surviving paths' information bits, best metric first.
    fn survivors(&self) -> Vec<Vec<u8>> {
        let mut ls: Vec<usize> = (0..self.list).filter(|&l| self.active[l]).collect();
        ls.sort_by(|&a, &b| self.metric[a].total_cmp(&self.metric[b]).then(a.cmp(&b)));
        ls.into_iter().map(|l| self.trace(l)).collect()
    }
}

/// Decodes channel LLRs of `ν = u·B_N·F^⊗n` (natural order, positive favours 0).
///
/// Returns the information bits (positions with `frozen[i] == false`, in index
/// order) of every surviving path, best path metric first.
pub(crate) fn decode_list(channel: &[f64], frozen: &[bool], list: usize) -> Vec<Vec<u8>> {
    debug_assert!(channel.len().is_power_of_two() && channel.len() == frozen.len());
    let mut dec = Decoder::new(channel, frozen, list.max(1));
    dec.run();
    dec.survivors()
}
