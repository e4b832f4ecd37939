use structleak::autodiff::ParamSet;
use structleak::{Graph, Matrix};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn mm(a: &Dense, b: &Dense) -> Dense {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn add_bias(mut x: Dense, b: &Matrix) -> Dense {
    for row in &mut x {
        for (v, bb) in row.iter_mut().zip(b.as_slice()) {
            *v += bb;
        }
    }
    x
}

pub fn relu(mut x: Dense) -> Dense {
    x.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
    x
}

pub fn weighted_adjacency(g: &Graph, w: &[f64]) -> Dense {
    let n = g.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        a[u][v] = w[e];
        a[v][u] = w[e];
    }
    a
}

pub fn close(a: &Dense, b: &Matrix, tol: f64) {
    assert_eq!((a.len(), a[0].len()), b.shape());
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            assert!(
                (a[i][j] - b[(i, j)]).abs() <= tol,
                "({i},{j}): {} vs {}",
                a[i][j],
                b[(i, j)]
            );
        }
    }
}

pub fn p(params: &ParamSet, name: &str) -> Dense {
    to_dense(params.get(name).unwrap())
}

pub fn dense_gin(params: &ParamSet, prefix: &str, h: &Dense, a: &Dense) -> Dense {
    let n = h.len();
    let mut z = mm(a, h);
    for i in 0..n {
        for j in 0..h[0].len() {
            z[i][j] += h[i][j];
        }
    }
    let z = relu(add_bias(
        mm(&z, &p(params, &format!("{prefix}.mlp.0.w"))),
        params.get(&format!("{prefix}.mlp.0.b")).unwrap(),
    ));
    relu(add_bias(
        mm(&z, &p(params, &format!("{prefix}.mlp.1.w"))),
        params.get(&format!("{prefix}.mlp.1.b")).unwrap(),
    ))
}

/// `ReLU(h W_s + mean_w(h) W_n + b)` with weighted-mean aggregation.
pub fn dense_sage(params: &ParamSet, prefix: &str, h: &Dense, a: &Dense) -> Dense {
    let mut mean = mm(a, h);
    for (i, row) in mean.iter_mut().enumerate() {
        let d: f64 = a[i].iter().sum();
        row.iter_mut().for_each(|v| *v = if d > 0.0 { *v / d } else { 0.0 });
    }
    let mut s = mm(h, &p(params, &format!("{prefix}.w_self")));
    let nb = mm(&mean, &p(params, &format!("{prefix}.w_nbr")));
    for i in 0..s.len() {
        for j in 0..s[0].len() {
            s[i][j] += nb[i][j];
        }
    }
    relu(add_bias(s, params.get(&format!("{prefix}.b")).unwrap()))
}
