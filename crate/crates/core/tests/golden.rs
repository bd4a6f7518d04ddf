use sha2::{Digest, Sha256};

use tpspp::io::{encode_pgm, encode_weights};
use tpspp::net::{checksum, rectifier_forward, WeightStore};
use tpspp::synth::{stripe_image, StripeParams};

fn close(got: [f64; 3], want: [f64; 3]) -> bool {
    got.iter()
        .zip(want)
        .all(|(g, w)| (g - w).abs() <= 1e-5 * (1.0 + w.abs()))
}

#[test]
fn synth_seed_seven() {
    let bytes = encode_pgm(&stripe_image(&StripeParams::default(), 7)).unwrap();
    assert_eq!(
        hex::encode(Sha256::digest(&bytes)),
        "2315444159d27e200a7c5012523bec5e53efef47b26edd96f241f9a3499c179e"
    );
}

#[test]
fn seeded_forward_checksums() {
    let img = stripe_image(&StripeParams::default(), 7);
    let out = rectifier_forward(&img, &WeightStore::seeded(1)).unwrap();
    let f_e = checksum(&out.pair.f_e);
    let f_d = checksum(&out.pair.f_d);
    assert!(
        close(
            f_e,
            [18.00822021611384, 18.00822021611384, 72.13739790680847]
        ),
        "{f_e:?}"
    );
    assert!(
        close(
            f_d,
            [269.8478269967891, 1816.0412155028753, 1079.0722566856057]
        ),
        "{f_d:?}"
    );
}

#[test]
fn seeded_weights_digest_is_stable() {
    let a = hex::encode(Sha256::digest(encode_weights(&WeightStore::seeded(1))));
    let b = hex::encode(Sha256::digest(encode_weights(&WeightStore::seeded(1))));
    assert_eq!(a, b);
    assert_ne!(
        a,
        hex::encode(Sha256::digest(encode_weights(&WeightStore::seeded(2))))
    );
}
