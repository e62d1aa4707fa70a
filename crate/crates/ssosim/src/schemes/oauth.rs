//! OAuth 2.0 / OpenID Connect driver (authorization code grant).
//!
//! Explicit association: each SP registers out-of-band with each IdP it
//! supports and receives a shared client secret. The SP swaps the code for an
//! access token over a back channel and queries the IdP for the user id; the
//! OIDC variant additionally receives a signed id token. Profile data flows
//! to the SP under the default scope.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct OAuthFamily {
    pub oidc: bool,
}

fn client_secret_name(sp: &PrincipalId, idp: &PrincipalId) -> String {
    format!("client-secret.{sp}.{idp}")
}

fn user_id(user: &PrincipalId, idp: &PrincipalId) -> Term {
    Term::atom(format!("{user}@{idp}"))
}

impl SchemeDriver for OAuthFamily {
    fn name(&self) -> SchemeName {
        if self.oidc {
            SchemeName::Oidc
        } else {
            SchemeName::OAuth2
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A2,
                conveyance: Conveyance::G1,
                verification: Verification::C1,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: if self.oidc {
                vec![
                    // Pairwise per-SP subject identifiers exist in the
                    // standard but major IdPs leave them off.
                    OptionalFeature {
                        key: "pairwise-ids",
                        default: FeatureValue::Flag(false),
                        affects: Some(crate::evaluator::Benefit::B13),
                    },
                    OptionalFeature {
                        key: "profile-scope",
                        default: FeatureValue::Flag(true),
                        affects: None,
                    },
                ]
            } else {
                vec![OptionalFeature {
                    key: "profile-scope",
                    default: FeatureValue::Flag(true),
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
        for i in 1..=cfg.idps {
            dep.idps.push(w.add_principal(&format!("idp{i}"), Role::IdP, None));
        }
        dep.home_idp = dep.idps[0].clone();

        let user = dep.user.clone();
        let idp = dep.home_idp.clone();
        let pw = w.weak_secret(&user, &format!("pw.{user}.{idp}"));
        w.put(&idp, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
        w.put(&user, "password", pw, Scope::User(user.clone()));
        w.put(
            &idp,
            &format!("profile:{user}"),
            Term::pair(Term::atom("profile"), Term::atom(format!("profile.{user}"))),
            Scope::User(user.clone()),
        );
        if self.oidc {
            let (sk, pk) = w.key_pair(&idp.clone(), &format!("idpkey.{idp}"), true);
            w.put(&idp, "signing-key", sk, Scope::Server);
            w.make_public(pk);
        }

        let pairwise = dep.features.flag("pairwise-ids", false);
        for sp in dep.sps.clone() {
            let uid = if pairwise {
                let n = w.nonce(&idp.clone(), &format!("sub.{user}.{sp}"));
                w.put(&idp, &format!("pairwise:{user}:{sp}"), n.clone(), Scope::User(user.clone()));
                n
            } else {
                user_id(&user, &idp)
            };
            w.put(&sp, &format!("account:{user}"), uid.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, uid);
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, run: &mut Run, sp: &PrincipalId) -> Vec<TraceEvent> {
        let start = run.world.step();
        // Manual registration with every IdP: an administrator submits a form
        // and a shared client secret is established.
        for idp in run.dep.idps.clone() {
            let secret = run
                .world
                .sym_key(&idp.clone(), &client_secret_name(sp, &idp), true);
            let _ = run.world.send(
                Channel::web(sp, &idp),
                Term::pair(Term::atom("client-registration"), Term::atom(sp.as_str())),
                Annotation::ManualRegistration,
            );
            let _ = run.world.send(Channel::web(&idp, sp), secret.clone(), Annotation::None);
            run.world.put(&idp, &client_secret_name(sp, &idp), secret.clone(), Scope::Server);
            run.world.put(sp, &client_secret_name(sp, &idp), secret, Scope::Server);
        }
        run.trace_from(start)
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new())
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let idp = run.dep.home_idp.clone();
        if run.world.store_term(sp, &client_secret_name(sp, &idp)).is_none() {
            return AuthOutcome::failure(FailureReason::NoAccount, run.trace_from(start));
        }
        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == idp.as_str())
        {
            // Support is per-IdP by construction; a dropped integration
            // simply is not offered on the login page.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        let pw = run.world.store_term(user, "password").cloned().expect("deployed");
        let uid = run
            .world
            .store_term(sp, &format!("account:{user}"))
            .cloned()
            .expect("account");
        let share_profile = run.dep.feature_flag("profile-scope", true);
        let oidc = self.oidc;

        let result = || -> Result<(), crate::world::WorldError> {
            let w = &mut run.world;
            // Pick the IdP from the SP's login buttons.
            w.send(Channel::web(user, device), Term::atom(idp.as_str()), Annotation::IdPSelected)?;
            w.send(Channel::web(device, sp), Term::atom(idp.as_str()), Annotation::None)?;
            // Redirect to the IdP, carrying the client id.
            w.send(
                Channel::redirect(sp, &idp, device),
                Term::pair(Term::atom("auth-request"), Term::atom(sp.as_str())),
                Annotation::None,
            )?;
            // Password login.
            w.send(Channel::web(user, device), pw.clone(), Annotation::UserAction)?;
            w.put(device, "input:password", pw.clone(), Scope::User(user.clone()));
            w.send(Channel::web(device, &idp), pw.clone(), Annotation::None)?;
            // Consent to the requested scopes.
            w.send(
                Channel::web(&idp, device),
                Term::pair(Term::atom("consent-request"), Term::atom(sp.as_str())),
                Annotation::None,
            )?;
            w.send(Channel::web(user, device), Term::atom("consent-granted"), Annotation::UserAction)?;
            w.send(Channel::web(device, &idp), Term::atom("consent-granted"), Annotation::None)?;

            // Authorization code via browser redirect.
            let code = w.nonce(&idp, "code");
            w.send(Channel::redirect(&idp, sp, device), code.clone(), Annotation::AssertionIssued)?;

            // Back channel: code + client secret for an access token.
            let secret = w.store_term(sp, &client_secret_name(sp, &idp)).cloned().unwrap();
            w.send(
                Channel::backchannel(sp, &idp),
                Term::pair(code.clone(), secret),
                Annotation::IdPQueried,
            )?;
            let token = w.nonce(&idp, "token");
            w.send(Channel::backchannel(&idp, sp), token.clone(), Annotation::None)?;
            w.put(sp, &format!("token:{user}"), token.clone(), Scope::User(user.clone()));

            // Identify the user behind the token.
            let accepted = if oidc {
                let sk = w.store_term(&idp, "signing-key").cloned().unwrap();
                let n = w.nonce(&idp, "idtok");
                let id_token =
                    Term::sign(sk, Term::list(&[uid.clone(), Term::atom(sp.as_str()), n]));
                w.send(Channel::backchannel(sp, &idp), token.clone(), Annotation::IdPQueried)?;
                w.send(Channel::backchannel(&idp, sp), id_token.clone(), Annotation::None)?;
                id_token
            } else {
                w.send(Channel::backchannel(sp, &idp), token.clone(), Annotation::IdPQueried)?;
                w.send(Channel::backchannel(&idp, sp), uid.clone(), Annotation::None)?;
                uid.clone()
            };
            w.put(sp, &format!("accepted:{user}"), accepted, Scope::User(user.clone()));

            if share_profile {
                let profile = w.store_term(&idp, &format!("profile:{user}")).cloned().unwrap();
                w.send(Channel::backchannel(&idp, sp), profile, Annotation::ProfileDataShared)?;
            }
            Ok(())
        }();

        match result {
            Ok(()) => {
                let session = create_session(&mut run.world, sp, user, uid, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second IdP deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let new_idp = run.dep.idps[1].clone();

        let pw = run.world.weak_secret(&user, &format!("pw.{user}.{new_idp}"));
        run.world.put(
            &new_idp,
            &format!("pwhash:{user}"),
            Term::hash(pw.clone()),
            Scope::User(user.clone()),
        );
        run.world.put(&user, "password", pw, Scope::User(user.clone()));
        run.world.put(
            &new_idp,
            &format!("profile:{user}"),
            Term::pair(Term::atom("profile"), Term::atom(format!("profile.{user}"))),
            Scope::User(user.clone()),
        );

        // The {user id, IdP} pair at every SP must be replaced by hand.
        let mut updates = 0;
        let new_uid = user_id(&user, &new_idp);
        for sp in run.dep.sps.clone() {
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), new_uid.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), new_uid.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), new_uid.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, new_uid.clone());
            updates += 1;
        }
        run.dep.home_idp = new_idp;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let idp = run.dep.home_idp.clone();
        let pw = run.world.store_term(victim, "password").cloned().expect("deployed");
        // A fresh authorization code is accepted once; the IdP issues one for
        // whoever completes a password login as the victim.
        let code = Term::Nonce(SecretId::new("atk.code"));
        AcceptanceSpec {
            routes: vec![Route {
                label: "present a fresh authorization code bound to the victim",
                requires: vec![Requirement::Oracle("idp-login")],
                emits: vec![],
            }],
            oracles: vec![Oracle {
                id: "idp-login",
                issuer: idp,
                needs: vec![pw],
                yields: vec![code.clone()],
                emits: vec![],
            }],
            attacker_seed: vec![],
            fresh_classes: vec![(code, SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_sp_with_three_idps_emits_three_manual_registrations() {
        let mut cfg = DeployConfig::default();
        cfg.idps = 3;
        let drv = OAuthFamily { oidc: false };
        let mut r = drv.deploy(&cfg).unwrap();
        let sp = r.dep.sps[0].clone();
        let trace = drv.register_sp(&mut r, &sp);
        assert_eq!(Run::count_annotation(&trace, Annotation::ManualRegistration), 3);
    }

    #[test]
    fn code_flow_reaches_session_and_queries_idp() {
        let drv = OAuthFamily { oidc: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        drv.register_sp(&mut r, &sp);
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert!(Run::count_annotation(&out.trace, Annotation::IdPQueried) >= 2);
        assert_eq!(Run::count_annotation(&out.trace, Annotation::ProfileDataShared), 1);
    }

    #[test]
    fn oidc_accepts_signed_id_token() {
        let drv = OAuthFamily { oidc: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        drv.register_sp(&mut r, &sp);
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
        let accepted = r.world.store_term(&sp, &format!("accepted:{user}")).unwrap();
        assert!(matches!(accepted, Term::Sign(..)));
    }

    #[test]
    fn idp_outage_fails_authentication() {
        let drv = OAuthFamily { oidc: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        drv.register_sp(&mut r, &sp);
        let idp = r.dep.home_idp.clone();
        r.world.inject(crate::world::Fault::Outage(idp)).unwrap();
        let out = drv.authenticate(&mut r, &user, &sp, &dev);
        assert!(!out.success);
        assert_eq!(out.failure, Some(FailureReason::OutagePath));
    }
}
