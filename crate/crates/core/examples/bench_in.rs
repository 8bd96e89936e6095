use tcgan::tensor::Tape;
use tcgan::rng::Rng;
use ndarray::ArrayD;

fn main() {
    let mut rng = Rng::seeded(0, 0);
    let x: ArrayD<f32> = rng.normal_array(&[80, 19, 32, 32]);
    let g: ArrayD<f32> = rng.normal_array(&[19]);
    let b: ArrayD<f32> = rng.normal_array(&[19]);
    // pre-create tape and leaves once; time op only
    let reps = 50;
    let tape = Tape::<f32>::new();
    let xv = tape.var(x.clone());
    let gv = tape.var(g.clone());
    let bv = tape.var(b.clone());
    let t0 = std::time::Instant::now();
    for _ in 0..reps {
        let _ = tape.instance_norm(xv, gv, bv, 1e-5);
    }
    println!("IN op only: {:.2} ms", t0.elapsed().as_secs_f64()*1000.0/reps as f64);

    // raw math loop over the same data
    let xs: Vec<f32> = x.iter().copied().collect();
    let m = 1024usize;
    let t0 = std::time::Instant::now();
    for _ in 0..reps {
        let mut out = vec![0f32; xs.len()];
        let mut xhat = vec![0f32; xs.len()];
        for (i, plane) in xs.chunks_exact(m).enumerate() {
            let mut s = [0f32; 4];
            let mut q = [0f32; 4];
            for c in plane.chunks_exact(4) {
                s[0]+=c[0]; q[0]+=c[0]*c[0];
                s[1]+=c[1]; q[1]+=c[1]*c[1];
                s[2]+=c[2]; q[2]+=c[2]*c[2];
                s[3]+=c[3]; q[3]+=c[3]*c[3];
            }
            let sum = s[0]+s[1]+s[2]+s[3];
            let sq = q[0]+q[1]+q[2]+q[3];
            let mean = sum/ m as f32;
            let var = (sq/m as f32 - mean*mean).max(0.0);
            let is = 1.0/(var+1e-5).sqrt();
            let ob = &mut out[i*m..(i+1)*m];
            let xb = &mut xhat[i*m..(i+1)*m];
            for ((o, xh), &p) in ob.iter_mut().zip(xb.iter_mut()).zip(plane.iter()) {
                let t = (p-mean)*is;
                *xh = t;
                *o = 1.3*t + 0.1;
            }
        }
        std::hint::black_box(&out);
        std::hint::black_box(&xhat);
    }
    println!("raw IN math: {:.2} ms", t0.elapsed().as_secs_f64()*1000.0/reps as f64);
}
