function Body(x, v, m) {
    this.x = x;
    this.v = v;
    this.m = m;
}

function step(bodies, dt) {
    var i = 0;
    while (i < bodies.length) {
        var bi = bodies[i];
        var j = i + 1;
        while (j < bodies.length) {
            var bj = bodies[j];
            var dx = bi.x - bj.x;
            var d2 = dx * dx + 0.01;
            var f = dt / d2;
            bi.v = bi.v - dx * bj.m * f;
            bj.v = bj.v + dx * bi.m * f;
            j = j + 1;
        }
        i = i + 1;
    }
    i = 0;
    while (i < bodies.length) {
        var b = bodies[i];
        b.x = b.x + dt * b.v;
        i = i + 1;
    }
}

function energy(bodies) {
    var e = 0;
    var i = 0;
    while (i < bodies.length) {
        var b = bodies[i];
        e = e + 0.5 * b.m * b.v * b.v;
        i = i + 1;
    }
    return e;
}

function benchmarkRun() {
    var bodies = [new Body(0, 0, 10), new Body(1.5, 0.1, 1), new Body(-2, -0.2, 1), new Body(4, 0.05, 0.5)];
    var k = 0;
    while (k < 100) {
        step(bodies, 0.01);
        k = k + 1;
    }
    return energy(bodies);
}

print(benchmarkRun());
