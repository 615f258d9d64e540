//! Additive secret sharing over Z_{2^64}: share, reconstruct, and a secure
//! mean of three clients' vectors, and the wire record of one share.

use asfgnn::secret::{aggregate_shared_sum, rec, shr, FixedPoint, Message, PayloadKind, Ring, SharedVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> asfgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ring = Ring::Z64;

    let x = ring.elem(123_456_789);
    let shares = shr(ring, x, 3, &mut rng)?;
    println!("shares of {}: {:?}", x.0, shares.iter().map(|s| s.0).collect::<Vec<_>>());
    println!("reconstructed: {}", rec(ring, &shares, 3)?.0);

    let codec = FixedPoint::default();
    let inputs = vec![vec![0.25, -1.5, 3.0], vec![0.75, 2.5, -1.0], vec![0.5, 0.5, 1.0]];
    let shared = inputs
        .iter()
        .map(|v| SharedVector::share(codec, v, inputs.len(), &mut rng))
        .collect::<asfgnn::Result<Vec<_>>>()?;
    let mean = aggregate_shared_sum(codec, &shared)?;
    println!("secure mean {mean:?}");

    let shared = SharedVector::share(codec, &inputs[0], 3, &mut rng)?;
    println!("client 0 revealed: {:?}", shared.reveal(codec)?);

    let msg = Message {
        round: 1,
        client_id: 0,
        kind: PayloadKind::Weights,
        scale: codec.frac_bits as u8,
        words: shared.shares[1].clone(),
    };
    let bytes = msg.encode();
    println!("share for party 1 is a {}-byte record", bytes.len());
    let (back, _) = Message::decode(&bytes)?;
    assert_eq!(back, msg);
    Ok(())
}
