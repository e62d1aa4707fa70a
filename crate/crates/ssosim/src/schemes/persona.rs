//! Mozilla Persona driver (primary protocol and the fallback bridge).
//!
//! The user's identity is their e-mail address. After a password login the
//! IdP certifies a browser-generated key pair; the browser then signs
//! identity assertions itself, so the IdP never learns which SPs the user
//! visits and the SP verifies everything locally. Certificates carry a
//! step-count lifetime, which is all that keeps logins working through an
//! IdP outage.
//!
//! The fallback variant authenticates users of providers that never adopted
//! the protocol: a bridge IdP verifies control of the mailbox out-of-band at
//! signup (or over an OAuth bridge when the provider supports it) and then
//! plays the IdP role itself.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct Persona {
    pub fallback: bool,
}

const DEFAULT_CERT_LIFETIME: u64 = 24;

fn email(user: &PrincipalId, provider: &PrincipalId) -> Term {
    Term::atom(format!("{user}@{provider}"))
}

impl Persona {
    /// The principal that signs user certificates.
    fn certifier(&self, dep: &Deployment) -> PrincipalId {
        dep.home_idp.clone()
    }

    fn email_of(&self, run: &Run) -> Term {
        let user = &run.dep.user;
        if self.fallback {
            email(user, &run.dep.mails[0])
        } else {
            email(user, &run.dep.home_idp)
        }
    }

    fn cert_lifetime(&self, dep: &Deployment) -> u64 {
        dep.features.count("cert-lifetime", DEFAULT_CERT_LIFETIME)
    }

    /// Obtain (or reuse) a certificate for a browser key on this device.
    /// Requires the certifier to be reachable when no valid cert is cached.
    fn ensure_certificate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        device: &PrincipalId,
    ) -> Result<(Term, Term), FailureReason> {
        let idp = self.certifier(&run.dep);
        let now = run.world.step();
        if let (Some(cert), Some(expiry)) = (
            run.world.store_term(device, "persona:cert").cloned(),
            run.world.store_term(device, "persona:cert-expiry").cloned(),
        ) {
            if let Term::Atom(e) = &expiry {
                let e: u64 = e.parse().unwrap_or(0);
                if e >= now {
                    let key = run.world.store_term(device, "persona:key").cloned().unwrap();
                    return Ok((key, cert));
                }
            }
        }

        let pw = run.world.store_term(user, "password").cloned().expect("deployed");
        let addr = self.email_of(run);
        let lifetime = self.cert_lifetime(&run.dep);
        let keyname = format!("browserkey.{user}.{device}.{now}");
        let (sk, pk) = run.world.key_pair(&device.clone(), &keyname, true);

        let steps = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            // Support discovery against the certifier's well-known document.
            w.send(Channel::web(device, &idp), Term::atom("wellknown-fetch"), Annotation::None)?;
            w.send(
                Channel::web(&idp, device),
                Term::pair(Term::atom("wellknown"), Term::atom(idp.as_str())),
                Annotation::None,
            )?;
            // Password login, then certification of the fresh browser key.
            w.send(Channel::web(user, device), pw.clone(), Annotation::UserAction)?;
            w.put(device, "input:password", pw.clone(), Scope::User(user.clone()));
            w.send(Channel::web(device, &idp), pw.clone(), Annotation::None)?;
            w.send(Channel::web(device, &idp), pk.clone(), Annotation::None)?;
            let idp_sk = w.store_term(&idp, "signing-key").cloned().unwrap();
            let expiry = Term::atom(format!("{}", w.step() + lifetime));
            let cert = Term::sign(idp_sk, Term::list(&[addr.clone(), pk.clone(), expiry.clone()]));
            w.send(Channel::web(&idp, device), cert.clone(), Annotation::None)?;
            w.put(device, "persona:key", sk.clone(), Scope::User(user.clone()));
            w.put(device, "persona:cert", cert.clone(), Scope::User(user.clone()));
            w.put(device, "persona:cert-expiry", expiry, Scope::User(user.clone()));
            Ok(cert)
        }();
        match steps {
            Ok(cert) => Ok((sk, cert)),
            Err(_) => Err(FailureReason::OutagePath),
        }
    }
}

impl SchemeDriver for Persona {
    fn name(&self) -> SchemeName {
        if self.fallback {
            SchemeName::PersonaFallback
        } else {
            SchemeName::Persona
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: if self.fallback { Association::A4 } else { Association::A1 },
                conveyance: Conveyance::G2,
                verification: Verification::C2,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: if self.fallback {
                vec![
                    OptionalFeature {
                        key: "cert-lifetime",
                        default: FeatureValue::Count(DEFAULT_CERT_LIFETIME),
                        affects: None,
                    },
                    OptionalFeature {
                        key: "oauth-bridge",
                        default: FeatureValue::Flag(false),
                        affects: None,
                    },
                ]
            } else {
                vec![OptionalFeature {
                    key: "cert-lifetime",
                    default: FeatureValue::Count(DEFAULT_CERT_LIFETIME),
                    affects: None,
                }]
            },
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one IdP and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let user = dep.user.clone();
        let dev = dep.primary_device().clone();

        if self.fallback {
            // Underlying mail providers, plus the bridge that certifies for
            // all of them.
            for i in 1..=cfg.idps {
                dep.mails.push(w.add_principal(&format!("mail{i}"), Role::MailProvider, None));
            }
            let bridge = w.add_principal("fallback", Role::BridgeIdP, None);
            let (sk, pk) = w.key_pair(&bridge.clone(), "fallbackkey", true);
            w.put(&bridge, "signing-key", sk, Scope::Server);
            w.make_public(pk);
            dep.home_idp = bridge.clone();
            dep.operator = Some(bridge.clone());

            let mail = dep.mails[0].clone();
            let mail_pw = w.weak_secret(&user, &format!("mailpw.{user}.{mail}"));
            w.put(&mail, &format!("pwhash:{user}"), Term::hash(mail_pw.clone()), Scope::User(user.clone()));
            w.put(&user, "mail-password", mail_pw, Scope::User(user.clone()));

            let addr = email(&user, &mail);
            w.make_public(addr.clone());

            if dep.features.flag("oauth-bridge", false) {
                // Provider supports delegated authorization: the bridge
                // obtains the address over a token instead of a mailed link.
                let _ = w.send(
                    Channel::web(&dev, &bridge),
                    Term::pair(Term::atom("signup"), addr.clone()),
                    Annotation::UserAction,
                );
                let grant = w.nonce(&bridge.clone(), "bridge-grant");
                let _ = w.send(Channel::redirect(&bridge, &mail, &dev), grant.clone(), Annotation::None);
                let _ = w.send(Channel::backchannel(&mail, &bridge), addr.clone(), Annotation::OobVerification);
            } else {
                // Signup verifies mailbox control with an e-mailed link.
                let _ = w.send(
                    Channel::web(&dev, &bridge),
                    Term::pair(Term::atom("signup"), addr.clone()),
                    Annotation::UserAction,
                );
                let link = w.nonce(&bridge.clone(), "verify-link");
                let _ = w.send(
                    Channel::email(&bridge, &mail),
                    Term::pair(link.clone(), addr.clone()),
                    Annotation::OobVerification,
                );
                let _ = w.send(Channel::web(&mail, &dev), link.clone(), Annotation::None);
                let _ = w.send(Channel::web(&dev, &bridge), link, Annotation::OobVerification);
            }
            // The account password used at the bridge from then on.
            let pw = w.weak_secret(&user, &format!("pw.{user}.fallback"));
            w.put(&bridge, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
            w.put(&bridge, &format!("verified:{user}"), addr.clone(), Scope::User(user.clone()));
            w.put(&user, "password", pw, Scope::User(user.clone()));

            for sp in dep.sps.clone() {
                w.put(&sp, &format!("account:{user}"), addr.clone(), Scope::User(user.clone()));
                put_account_ids(&mut w, &sp, &user, addr.clone());
            }
        } else {
            // E-mail providers acting as IdPs directly.
            for i in 1..=cfg.idps {
                let idp = w.add_principal(&format!("idp{i}"), Role::IdP, None);
                let (sk, pk) = w.key_pair(&idp.clone(), &format!("idpkey.{idp}"), true);
                w.put(&idp, "signing-key", sk, Scope::Server);
                w.make_public(pk);
                dep.idps.push(idp);
            }
            dep.home_idp = dep.idps[0].clone();
            let idp = dep.home_idp.clone();
            let pw = w.weak_secret(&user, &format!("pw.{user}.{idp}"));
            w.put(&idp, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
            w.put(&user, "password", pw, Scope::User(user.clone()));
            let addr = email(&user, &idp);
            w.make_public(addr.clone());
            for sp in dep.sps.clone() {
                w.put(&sp, &format!("account:{user}"), addr.clone(), Scope::User(user.clone()));
                put_account_ids(&mut w, &sp, &user, addr.clone());
            }
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new() // any SP can consume assertions from any provider
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new()) // a fresh browser obtains its own certificate on first login
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let addr = self.email_of(run);
        let authority = if self.fallback {
            run.dep.mails[0].clone()
        } else {
            run.dep.home_idp.clone()
        };
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == authority.as_str())
        {
            // SPs filter by the domain part of the address.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        if run
            .world
            .send(Channel::web(user, device), addr.clone(), Annotation::UserAction)
            .is_err()
        {
            return AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start));
        }

        let (sk, cert) = match self.ensure_certificate(run, user, device) {
            Ok(found) => found,
            Err(reason) => {
                // Distinguish a dead certifier with an expired cert from a
                // plain outage: the browser still holds a cert, it is just
                // too old to use.
                let had_cert = run.world.store_term(device, "persona:cert").is_some();
                let reason = if had_cert { FailureReason::CertificateExpired } else { reason };
                return AuthOutcome::failure(reason, run.trace_from(start));
            }
        };

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            // The browser mints and signs the assertion itself.
            let expiry = Term::atom(format!("{}", w.step() + 2));
            let assertion = Term::sign(sk, Term::pair(Term::atom(sp.as_str()), expiry));
            let bundle = Term::pair(assertion, cert.clone());
            w.send(Channel::web(device, sp), bundle.clone(), Annotation::AssertionIssued)?;
            w.send(Channel::web(sp, device), Term::atom("login-ok"), Annotation::AssertionVerifiedLocally)?;
            Ok(bundle)
        }();

        match result {
            Ok(bundle) => {
                run.world
                    .put(sp, &format!("accepted:{user}"), bundle, Scope::User(user.clone()));
                let session = create_session(&mut run.world, sp, user, addr, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();

        // A new provider means a new address; every SP account is re-keyed.
        let (new_authority, new_addr) = if self.fallback {
            if run.dep.mails.len() < 2 {
                return Err(SchemeError::SwitchImpossible("no second mail provider".into()));
            }
            let mail = run.dep.mails[1].clone();
            (mail.clone(), email(&user, &mail))
        } else {
            if run.dep.idps.len() < 2 {
                return Err(SchemeError::SwitchImpossible("no second IdP deployed".into()));
            }
            let idp = run.dep.idps[1].clone();
            (idp.clone(), email(&user, &idp))
        };
        run.world.make_public(new_addr.clone());

        if !self.fallback {
            let pw = run.world.weak_secret(&user, &format!("pw.{user}.{new_authority}"));
            run.world.put(
                &new_authority,
                &format!("pwhash:{user}"),
                Term::hash(pw.clone()),
                Scope::User(user.clone()),
            );
            run.world.put(&user, "password", pw, Scope::User(user.clone()));
            run.dep.home_idp = new_authority;
        } else {
            run.world.put(
                &run.dep.home_idp.clone(),
                &format!("verified:{user}"),
                new_addr.clone(),
                Scope::User(user.clone()),
            );
        }

        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), new_addr.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), new_addr.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), new_addr.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, new_addr.clone());
            updates += 1;
        }
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let idp = self.certifier(&run.dep);
        let idp_sk = run.world.store_term(&idp, "signing-key").cloned().expect("deployed");
        let addr = self.email_of(run);
        let pw = run.world.store_term(victim, "password").cloned().expect("deployed");
        let expiry = Term::atom("999999");

        // Attacker-side browser key the certifier would happily certify
        // after any successful login or account reset as the victim.
        let atk_sk = Term::PrivKey(SecretId::new("atk.browserkey"));
        let atk_pk = Term::PubKey(SecretId::new("atk.browserkey"));
        let atk_cert = Term::sign(idp_sk.clone(), Term::list(&[addr.clone(), atk_pk, expiry.clone()]));

        let mut routes = vec![Route {
            label: "assertion under a certified attacker key",
            requires: vec![
                Requirement::Oracle("issue-certificate"),
                Requirement::Derive(Term::pair(
                    Term::sign(atk_sk.clone(), Term::pair(Term::atom(sp.as_str()), expiry.clone())),
                    atk_cert.clone(),
                )),
            ],
            emits: vec![],
        }];
        let mut oracles = vec![Oracle {
            id: "issue-certificate",
            issuer: idp.clone(),
            needs: vec![pw],
            yields: vec![atk_sk.clone(), atk_cert],
            emits: vec![],
        }];

        // A stolen (still valid) browser key plus its certificate works too.
        if let (Some(victim_sk), Some(victim_cert)) = (
            run.world.store_term(run.dep.primary_device(), "persona:key"),
            run.world.store_term(run.dep.primary_device(), "persona:cert"),
        ) {
            routes.push(Route {
                label: "assertion under the victim's stolen browser key",
                requires: vec![Requirement::Derive(Term::pair(
                    Term::sign(victim_sk.clone(), Term::pair(Term::atom(sp.as_str()), expiry.clone())),
                    victim_cert.clone(),
                ))],
                emits: vec![],
            });
        }

        if self.fallback {
            // The mail provider can complete a fresh mailbox-verified signup
            // (or password reset) for its own user, then log in normally.
            let mail = run.dep.mails[0].clone();
            let reset_link = Term::Nonce(SecretId::new("atk.reset-link"));
            oracles.push(Oracle {
                id: "mailbox-account-reset",
                issuer: mail,
                needs: vec![run
                    .world
                    .store_term(victim, "mail-password")
                    .cloned()
                    .expect("deployed")],
                yields: vec![reset_link.clone()],
                emits: vec![],
            });
            let reset_cert = Term::sign(
                idp_sk,
                Term::list(&[addr, Term::PubKey(SecretId::new("atk.browserkey")), expiry.clone()]),
            );
            oracles.push(Oracle {
                id: "issue-certificate-after-reset",
                issuer: idp,
                needs: vec![reset_link],
                yields: vec![atk_sk.clone(), reset_cert.clone()],
                emits: vec![],
            });
            routes.push(Route {
                label: "certificate obtained through a mailbox-verified reset",
                requires: vec![
                    Requirement::Oracle("issue-certificate-after-reset"),
                    Requirement::Derive(Term::pair(
                        Term::sign(atk_sk.clone(), Term::pair(Term::atom(sp.as_str()), expiry)),
                        reset_cert,
                    )),
                ],
                emits: vec![],
            });
        }

        AcceptanceSpec {
            routes,
            oracles,
            // The attacker generates its own browser key; certificates for it
            // only ever come out of the issuance oracles.
            attacker_seed: vec![atk_sk],
            fresh_classes: vec![
                (Term::PrivKey(SecretId::new("atk.browserkey")), SecretClass::strong()),
                (Term::Nonce(SecretId::new("atk.reset-link")), SecretClass::strong()),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Fault;

    fn persona() -> Persona {
        Persona { fallback: false }
    }

    fn outage_all_remote(r: &mut Run) {
        for p in r.world.remote_service_principals() {
            r.world.inject(Fault::Outage(p)).unwrap();
        }
    }

    #[test]
    fn idp_never_sees_the_sp() {
        let drv = persona();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
        let idp_view = r.world.observe(&r.dep.home_idp);
        assert!(!idp_view.iter().any(|t| t.mentions_atom(sp.as_str())));
    }

    #[test]
    fn unexpired_certificate_survives_idp_outage() {
        let drv = persona();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
        outage_all_remote(&mut r);
        let again = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(again.success, "cached certificate should carry the login");
    }

    #[test]
    fn expired_certificate_with_dead_idp_fails() {
        let drv = persona();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
        outage_all_remote(&mut r);
        r.world.advance(DEFAULT_CERT_LIFETIME + 1);
        let again = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(!again.success);
        assert_eq!(again.failure, Some(FailureReason::CertificateExpired));
    }

    #[test]
    fn fallback_signup_verifies_mailbox_out_of_band() {
        let drv = Persona { fallback: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let oob = r
            .world
            .trace()
            .iter()
            .filter(|e| e.annotation == Annotation::OobVerification)
            .count();
        assert!(oob >= 2, "mailed link plus echo");
    }

    #[test]
    fn assertion_is_browser_signed() {
        let drv = persona();
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
        let bundle = r.world.store_term(&sp, &format!("accepted:{user}")).unwrap();
        if let Term::Pair(assertion, cert) = bundle {
            let dev_key = r.world.store_term(&dev, "persona:key").unwrap();
            if let (Term::Sign(k, _), Term::Sign(ck, _)) = (&**assertion, &**cert) {
                assert_eq!(&**k, dev_key, "assertion signed by the browser key");
                let idp_key = r.world.store_term(&r.dep.home_idp, "signing-key").unwrap();
                assert_eq!(&**ck, idp_key, "certificate signed by the IdP");
            } else {
                panic!("expected signatures");
            }
        } else {
            panic!("expected assertion+certificate bundle");
        }
    }
}
