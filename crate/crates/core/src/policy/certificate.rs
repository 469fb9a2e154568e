use serde::{Deserialize, Serialize};

use super::{AttributeSet, PolicyError};
use crate::crypto::{ds_sign, ds_verify, PublicKey, SecretKey, Signature};
use crate::encoding::Encoder;

/// CA signature binding a public key to an attribute set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCertificate {
    pub subject_pk: PublicKey,
    pub attributes: AttributeSet,
    pub ca_signature: Signature,
}

impl AttributeCertificate {
    /// The bytes the CA signs.
    pub fn signed_message(subject_pk: &PublicKey, attributes: &AttributeSet) -> Vec<u8> {
        let mut enc = Encoder::tagged("efrb/cert");
        enc.fixed(subject_pk.as_bytes());
        attributes.encode_into(&mut enc);
        enc.finish()
    }

    /// Full encoding including the CA signature, used wherever a
    /// certificate is itself covered by another signature.
    pub fn encode_into(&self, enc: &mut Encoder) {
        enc.fixed(self.subject_pk.as_bytes());
        self.attributes.encode_into(enc);
        enc.fixed(&self.ca_signature.0);
    }
}

pub fn issue_certificate(
    ca_sk: &SecretKey,
    subject_pk: &PublicKey,
    attributes: AttributeSet,
) -> Result<AttributeCertificate, PolicyError> {
    if attributes.is_empty() {
        return Err(PolicyError::EmptyAttributeSet);
    }
    let ca_signature = ds_sign(
        &AttributeCertificate::signed_message(subject_pk, &attributes),
        ca_sk,
    );
    Ok(AttributeCertificate {
        subject_pk: *subject_pk,
        attributes,
        ca_signature,
    })
}

pub fn verify_certificate(ca_pk: &PublicKey, cert: &AttributeCertificate) -> bool {
    ds_verify(
        &cert.ca_signature,
        &AttributeCertificate::signed_message(&cert.subject_pk, &cert.attributes),
        ca_pk,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ds_kgen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn issue_and_verify() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ca = ds_kgen(&mut rng);
        let user = ds_kgen(&mut rng);
        let cert =
            issue_certificate(&ca.sk, &user.pk, AttributeSet::new(["Student"]).unwrap()).unwrap();
        assert!(verify_certificate(&ca.pk, &cert));
        assert!(!verify_certificate(&user.pk, &cert));
    }

    #[test]
    fn empty_set_is_refused() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ca = ds_kgen(&mut rng);
        assert_eq!(
            issue_certificate(&ca.sk, &ca.pk, AttributeSet::empty()),
            Err(PolicyError::EmptyAttributeSet)
        );
    }

    #[test]
    fn tampering_breaks_verification() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let ca = ds_kgen(&mut rng);
        for trial in 0..100 {
            let user = ds_kgen(&mut rng);
            let n = rng.gen_range(1..6);
            let attrs: Vec<String> = (0..n).map(|i| format!("attr{trial}-{i}")).collect();
            let mut cert =
                issue_certificate(&ca.sk, &user.pk, AttributeSet::new(attrs.clone()).unwrap())
                    .unwrap();
            let mut mutated = attrs;
            let pick = rng.gen_range(0..mutated.len());
            mutated[pick].push('!');
            cert.attributes = AttributeSet::new(mutated).unwrap();
            assert!(!verify_certificate(&ca.pk, &cert));
        }
    }

    #[test]
    fn swapped_subject_breaks_verification() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ca = ds_kgen(&mut rng);
        let user = ds_kgen(&mut rng);
        let other = ds_kgen(&mut rng);
        let mut cert =
            issue_certificate(&ca.sk, &user.pk, AttributeSet::new(["A"]).unwrap()).unwrap();
        cert.subject_pk = other.pk;
        assert!(!verify_certificate(&ca.pk, &cert));
    }
}
