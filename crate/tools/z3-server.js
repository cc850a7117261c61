// Warm z3 backend for the z3-smt2 front-end. Listens on a unix socket,
// evaluates one SMT-LIB 2 script per connection in a fresh context, and
// exits after a period of inactivity. Started on demand by z3-smt2; not
// meant to be run by hand.
const net = require('net');
const fs = require('fs');
const { init } = require('z3-solver');

const sock = process.argv[2];
const IDLE_MS = 120000;

async function main() {
  const { Z3 } = await init();
  let idleTimer = null;
  const bumpIdle = (server) => {
    if (idleTimer) clearTimeout(idleTimer);
    idleTimer = setTimeout(() => {
      server.close();
      try { fs.unlinkSync(sock); } catch {}
      process.exit(0);
    }, IDLE_MS);
  };

  // the wasm engine is single-threaded: requests must run one at a time,
  // so they are chained on a queue promise
  let queue = Promise.resolve();
  const evalOne = (input) =>
    (queue = queue.then(async () => {
      try {
        // a fresh context per request keeps scripts fully isolated
        const cfg = Z3.mk_config();
        const ctx = Z3.mk_context(cfg);
        const out = await Z3.eval_smtlib2_string(ctx, input);
        Z3.del_context(ctx);
        return out;
      } catch (e) {
        return '(error "' + String(e).replace(/"/g, "'") + '")';
      }
    }));

  // allowHalfOpen: the client half-closes to mark end of input and still
  // expects the response on the other direction
  const server = net.createServer({ allowHalfOpen: true }, (conn) => {
    bumpIdle(server);
    const chunks = [];
    conn.on('data', (d) => chunks.push(d));
    conn.on('error', () => {});
    conn.on('end', async () => {
      const input = Buffer.concat(chunks).toString('utf8');
      const out = await evalOne(input);
      conn.end(out.endsWith('\n') || out === '' ? out : out + '\n');
      bumpIdle(server);
    });
  });
  try { fs.unlinkSync(sock); } catch {}
  server.listen(sock, () => bumpIdle(server));
}

main().catch((e) => {
  process.stderr.write(String(e) + '\n');
  process.exit(1);
});
